"""Mechanics of a two-ion crystal in an anisotropic harmonic trap.

Center-of-mass motion sees the bare trap frequencies. Relative motion sees
the trap plus Coulomb repulsion, which for nu_x < nu_y < nu_z has its minima
on the x axis and saddle points on the y and z axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import constants as C
from .errors import ConfigError, DegenerateTrapError

MODE_LABELS = ("X", "Y", "Z", "x~", "y~", "z~")
_AXES = np.eye(3)

LOCALIZED = "localized"
RING = "ring"
SPHERE = "sphere"
UNBOUNDED = "unbounded_heating"
UNDETERMINED = "undetermined"  # no light scattered, or no geometry given
_PHASE_ORDER = {LOCALIZED: 0, RING: 1, SPHERE: 2, UNBOUNDED: 3}


@dataclass(frozen=True)
class TrapConfig:
    """Trap and beam geometry. Frequencies are cyclic (Hz)."""

    nu_x: float = 1.0035e6
    nu_y: float = 1.0220e6
    nu_z: float = 1.0530e6
    ion_mass: float = C.BA138_MASS_U * C.AMU
    ion_charge: float = C.E_CHARGE
    beam_direction: tuple = (1 / math.sqrt(3),) * 3
    wavelengths: Mapping[str, float] = field(default_factory=lambda: dict(C.WAVELENGTHS))
    # optional per-laser override of the propagation direction
    beam_directions: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        freqs = (self.nu_x, self.nu_y, self.nu_z)
        if not all(np.isfinite(freqs)) or min(freqs) <= 0:
            raise ConfigError(f"trap frequencies must be positive, got {freqs}")
        if self.ion_mass <= 0 or self.ion_charge == 0:
            raise ConfigError("ion mass must be positive and charge nonzero")
        if not (self.nu_x < self.nu_y):
            raise DegenerateTrapError(
                f"need nu_x < nu_y for a localized crystal, got {self.nu_x} >= {self.nu_y}"
            )
        if not (self.nu_y < self.nu_z):
            raise DegenerateTrapError(f"need nu_y < nu_z, got {self.nu_y} >= {self.nu_z}")
        for d in (self.beam_direction, *self.beam_directions.values()):
            if abs(np.linalg.norm(d) - 1.0) > 1e-12:
                raise ConfigError(f"beam direction {d} is not a unit vector")
        for label, lam in self.wavelengths.items():
            if not lam > 0:
                raise ConfigError(f"wavelength for {label!r} must be positive")

    @property
    def omegas(self) -> np.ndarray:
        return C.TWO_PI * np.array([self.nu_x, self.nu_y, self.nu_z])

    @property
    def reduced_mass(self) -> float:
        return self.ion_mass / 2

    @property
    def coulomb_k(self) -> float:
        return self.ion_charge**2 / (4 * math.pi * C.EPS0)

    def direction(self, label: str) -> np.ndarray:
        return np.asarray(self.beam_directions.get(label, self.beam_direction), float)

    def wavevector(self, label: str) -> np.ndarray:
        return C.TWO_PI / self.wavelengths[label] * self.direction(label)


@dataclass(frozen=True)
class Mode:
    label: str
    omega: float  # rad/s
    axis: int  # 0, 1, 2 for x, y, z
    kind: str  # "com" or "relative"
    lamb_dicke: Mapping[str, float]

    @property
    def nu(self) -> float:
        return self.omega / C.TWO_PI

    @property
    def in_lamb_dicke_regime(self) -> bool:
        return all(0 <= eta < 1 for eta in self.lamb_dicke.values())


@dataclass(frozen=True)
class ModeTable:
    modes: tuple

    def __getitem__(self, label: str) -> Mode:
        for m in self.modes:
            if m.label == label:
                return m
        raise KeyError(f"unknown mode {label!r}; expected one of {MODE_LABELS}")

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    @property
    def flagged(self) -> list:
        """Labels of modes with any LDP outside the Lamb-Dicke regime."""
        return [m.label for m in self.modes if not m.in_lamb_dicke_regime]


@dataclass(frozen=True)
class CrystalGeometry:
    r0: float  # m
    barrier_y: float  # J
    barrier_z: float  # J
    well_positions: tuple  # ion coordinates relative to trap center, m


def relative_potential(cfg: TrapConfig, r) -> np.ndarray:
    """Potential of the relative coordinate r = r2 - r1 (shape (..., 3)), J."""
    r = np.asarray(r, float)
    w = cfg.omegas
    harm = 0.5 * cfg.reduced_mass * np.sum((w * r) ** 2, axis=-1)
    return harm + cfg.coulomb_k / np.linalg.norm(r, axis=-1)


def _saddle_distance(cfg: TrapConfig, omega: float) -> float:
    return (cfg.coulomb_k / (cfg.reduced_mass * omega**2)) ** (1 / 3)


def equilibrium_separation(cfg: TrapConfig) -> float:
    """Ion separation at the potential minimum on the x axis, m."""
    return _saddle_distance(cfg, cfg.omegas[0])


def barriers(cfg: TrapConfig) -> tuple:
    """Barrier heights (dV_y, dV_z) in J above the minimum.

    dV_y follows the closed form; dV_z is the potential evaluated at the z-axis
    saddle point minus the well value, since the closed form is only quoted
    for y. Both agree in form anyway.
    """
    wx, wy, _ = cfg.omegas
    if wy <= wx:
        raise DegenerateTrapError("barrier undefined for nu_y <= nu_x")
    pref = 1.5 * (cfg.coulomb_k**2 * cfg.reduced_mass) ** (1 / 3)
    dv_y = pref * (wy ** (2 / 3) - wx ** (2 / 3))
    r0 = equilibrium_separation(cfg)
    well = relative_potential(cfg, r0 * _AXES[0])
    rz = _saddle_distance(cfg, cfg.omegas[2])
    dv_z = float(relative_potential(cfg, rz * _AXES[2]) - well)
    return float(dv_y), dv_z


def crystal_geometry(cfg: TrapConfig) -> CrystalGeometry:
    r0 = equilibrium_separation(cfg)
    dv_y, dv_z = barriers(cfg)
    half = 0.5 * r0 * _AXES[0]
    return CrystalGeometry(r0, dv_y, dv_z, (tuple(-half), tuple(half)))


def mode_frequencies(cfg: TrapConfig) -> np.ndarray:
    """Angular frequencies in table order X, Y, Z, x~, y~, z~."""
    wx, wy, wz = cfg.omegas
    rel = [math.sqrt(3) * wx, math.sqrt(wy**2 - wx**2), math.sqrt(wz**2 - wx**2)]
    return np.array([wx, wy, wz, *rel])


def lamb_dicke(cfg: TrapConfig, label: str, axis: int, omega: float) -> float:
    """|k . e_q| sqrt(hbar / 2 m omega), single-ion mass for every mode."""
    proj = abs(float(cfg.wavevector(label) @ _AXES[axis]))
    return proj * math.sqrt(C.HBAR / (2 * cfg.ion_mass * omega))


def mode_table(cfg: TrapConfig) -> ModeTable:
    freqs = mode_frequencies(cfg)
    modes = []
    for i, (label, w) in enumerate(zip(MODE_LABELS, freqs)):
        axis = i % 3
        etas = {lam: lamb_dicke(cfg, lam, axis, w) for lam in cfg.wavelengths}
        modes.append(Mode(label, float(w), axis, "com" if i < 3 else "relative", etas))
    return ModeTable(tuple(modes))


def classify_motion(e_ex: float, geom: CrystalGeometry) -> str:
    """Motional phase for mean motional energy ``e_ex`` (J).

    Non-finite or negative energies mean the lasers heat (no steady state).
    """
    if e_ex is None or not np.isfinite(e_ex) or e_ex < 0:
        return UNBOUNDED
    if e_ex < geom.barrier_y:
        return LOCALIZED
    if e_ex < geom.barrier_z:
        return RING
    return SPHERE


def phase_rank(label: str) -> int:
    return _PHASE_ORDER[label]
