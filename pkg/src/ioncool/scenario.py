"""One experimental setting: trap, magnetic field, decay constants and both lasers.

Spectra, cooling scans and the optimizer all vary laser parameters on top of
a fixed ``Scenario``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

from .atom import DecayConfig, InternalModel, LaserField, ZeemanStructure, build_model
from .cooling import CoolingReport, ModeSelection, cooling_report
from .trap import CrystalGeometry, ModeTable, TrapConfig, crystal_geometry, mode_table

# 4-D laser parameter vector, cyclic Hz
PARAMS = ("rabi_493", "rabi_650", "detuning_493", "detuning_650")

# fitted values from the excitation spectrum of the two-ion experiment, cyclic Hz
FITTED = {"rabi_650": 59.0e6, "rabi_493": 46.2e6, "detuning_493": -44.3e6, "larmor": 7.7e6}


def _default_lasers():
    return (
        LaserField("493", FITTED["rabi_493"], FITTED["detuning_493"]),
        LaserField("650", FITTED["rabi_650"], -60.0e6),
    )


@dataclass(frozen=True)
class Scenario:
    trap: TrapConfig = field(default_factory=TrapConfig)
    zeeman: ZeemanStructure = field(default_factory=lambda: ZeemanStructure(larmor=FITTED["larmor"]))
    decay: DecayConfig = field(default_factory=DecayConfig)
    lasers: tuple = field(default_factory=_default_lasers)
    rabi_convention: str = "oscillation"
    mode: str = "y~"
    ions: int = 2

    def laser(self, label: str) -> LaserField:
        for las in self.lasers:
            if las.label == label:
                return las
        raise KeyError(label)

    @property
    def params(self) -> dict:
        return {
            "rabi_493": self.laser("493").rabi,
            "rabi_650": self.laser("650").rabi,
            "detuning_493": self.laser("493").detuning,
            "detuning_650": self.laser("650").detuning,
        }

    def with_params(self, **params) -> "Scenario":
        """Copy with any of ``PARAMS`` (cyclic Hz) or ``larmor`` replaced."""
        unknown = set(params) - set(PARAMS) - {"larmor", "mode"}
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        lasers = []
        for las in self.lasers:
            kw = {}
            if f"rabi_{las.label}" in params:
                kw["rabi"] = float(params[f"rabi_{las.label}"])
            if f"detuning_{las.label}" in params:
                kw["detuning"] = float(params[f"detuning_{las.label}"])
            lasers.append(replace(las, **kw) if kw else las)
        out = replace(self, lasers=tuple(lasers))
        if "larmor" in params:
            out = replace(out, zeeman=replace(self.zeeman, larmor=float(params["larmor"])))
        if "mode" in params:
            out = replace(out, mode=params["mode"])
        return out

    def model(self) -> InternalModel:
        return build_model(self.lasers, self.zeeman, self.decay, self.rabi_convention)

    @cached_property
    def modes(self) -> ModeTable:
        return mode_table(self.trap)

    @cached_property
    def geometry(self) -> CrystalGeometry:
        return crystal_geometry(self.trap)

    def mode_selection(self, label: str = None) -> ModeSelection:
        return ModeSelection.from_mode(self.modes[label or self.mode], self.trap, self.ions)

    def report(self, mode: str = None, check_unique: bool = True) -> CoolingReport:
        return cooling_report(
            self.model(), self.mode_selection(mode), self.geometry, ions=self.ions, check_unique=check_unique
        )


def paper_scenario(**params) -> Scenario:
    """Scenario with the fitted two-ion parameter set; overrides in cyclic Hz."""
    return Scenario().with_params(**params)
