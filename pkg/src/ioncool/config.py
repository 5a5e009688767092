"""Run configuration: INI files in the units the experiment quotes (MHz, u, e).

Every frequency is a cyclic MHz value, i.e. "59 x 2pi MHz" is entered as 59.
Sections::

    [trap]       nu_x nu_y nu_z mass charge beam_direction beam_direction_<laser>
    [laser 493]  rabi detuning polarization propagation linewidth
    [laser 650]  (same keys)
    [zeeman]     larmor direction g_S g_P g_D
    [decay]      total_rate branching_s
    [run]        mode scan seed samples robust out rabi_convention ions objective refine workers

Vectors are comma separated. Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from . import constants as C
from .atom import DecayConfig, LaserField, ZeemanStructure
from .errors import ConfigError
from .scenario import FITTED, Scenario
from .trap import MODE_LABELS, TrapConfig

LASER_LABELS = ("493", "650")


@dataclass(frozen=True)
class TrapSection:
    nu_x: float = 1.0035
    nu_y: float = 1.0220
    nu_z: float = 1.0530
    mass: float = C.BA138_MASS_U
    charge: float = 1.0
    beam_direction: tuple = (1 / math.sqrt(3),) * 3
    beam_direction_493: Optional[tuple] = None
    beam_direction_650: Optional[tuple] = None
    beam_direction_1762: Optional[tuple] = None


@dataclass(frozen=True)
class LaserSection:
    rabi: float
    detuning: float
    polarization: tuple = (1.0, 0.0, 0.0)
    propagation: tuple = (0.0, 1.0, 0.0)
    linewidth: float = 0.0


@dataclass(frozen=True)
class ZeemanSection:
    larmor: float = FITTED["larmor"] / 1e6
    direction: tuple = (0.0, 0.0, 1.0)
    g_S: float = 2.0
    g_P: float = 2 / 3
    g_D: float = 4 / 5


@dataclass(frozen=True)
class DecaySection:
    total_rate: float = C.P_DECAY_RATE_MHZ
    branching_s: float = C.P_BRANCHING_S


@dataclass(frozen=True)
class RunSection:
    mode: str = "y~"
    scan: Optional[str] = None  # axis:from:to:step in MHz
    seed: int = 0
    samples: int = 1000
    robust: Optional[float] = None  # drift step, MHz
    out: Optional[str] = None
    rabi_convention: str = "oscillation"
    ions: int = 2
    objective: str = "nbar"
    refine: bool = False
    workers: int = 1


def _default_lasers():
    return {
        "493": LaserSection(FITTED["rabi_493"] / 1e6, FITTED["detuning_493"] / 1e6),
        "650": LaserSection(FITTED["rabi_650"] / 1e6, -60.0),
    }


@dataclass(frozen=True)
class ScanSpec:
    axis: str
    start: float  # MHz
    stop: float
    step: float

    @classmethod
    def parse(cls, text: str) -> "ScanSpec":
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"scan must be axis:from:to:step, got {text!r}")
        axis = parts[0].strip()
        if axis not in LASER_LABELS:
            raise ConfigError(f"scan axis must be one of {LASER_LABELS}, got {axis!r}")
        try:
            start, stop, step = (float(p) for p in parts[1:])
        except ValueError:
            raise ConfigError(f"scan bounds must be numbers, got {text!r}") from None
        if start != stop and not step > 0:
            raise ConfigError(f"scan step must be positive, got {step}")
        return cls(axis, start, stop, step)

    def __str__(self):
        return f"{self.axis}:{self.start!r}:{self.stop!r}:{self.step!r}"


@dataclass(frozen=True)
class RunConfig:
    trap: TrapSection = field(default_factory=TrapSection)
    lasers: dict = field(default_factory=_default_lasers)
    zeeman: ZeemanSection = field(default_factory=ZeemanSection)
    decay: DecaySection = field(default_factory=DecaySection)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self):
        if set(self.lasers) != set(LASER_LABELS):
            raise ConfigError(f"need exactly the lasers {LASER_LABELS}")
        if self.run.mode not in MODE_LABELS:
            raise ConfigError(f"run.mode: unknown mode {self.run.mode!r}, expected one of {MODE_LABELS}")
        if self.run.scan is not None:
            try:
                ScanSpec.parse(self.run.scan)
            except ConfigError as err:
                raise ConfigError(f"run.scan: {err}") from None
        if self.run.robust is not None and self.run.robust < 0:
            raise ConfigError("run.robust: drift step must be >= 0")
        if self.run.samples < 1:
            raise ConfigError("run.samples must be >= 1")
        if self.run.seed < 0 or self.run.seed >= 2**64:
            raise ConfigError("run.seed must be an unsigned 64-bit integer")

    @property
    def scan(self) -> Optional[ScanSpec]:
        return None if self.run.scan is None else ScanSpec.parse(self.run.scan)

    def with_paper_defaults(self) -> "RunConfig":
        """Replace the four fitted quantities by their published values."""
        lasers = dict(self.lasers)
        lasers["493"] = replace(lasers["493"], rabi=FITTED["rabi_493"] / 1e6, detuning=FITTED["detuning_493"] / 1e6)
        lasers["650"] = replace(lasers["650"], rabi=FITTED["rabi_650"] / 1e6)
        return replace(self, lasers=lasers, zeeman=replace(self.zeeman, larmor=FITTED["larmor"] / 1e6))

    def scenario(self) -> Scenario:
        t = self.trap
        overrides = {lab: getattr(t, f"beam_direction_{lab}") for lab in C.WAVELENGTHS}
        trap = TrapConfig(
            nu_x=t.nu_x * 1e6, nu_y=t.nu_y * 1e6, nu_z=t.nu_z * 1e6,
            ion_mass=t.mass * C.AMU, ion_charge=t.charge * C.E_CHARGE,
            beam_direction=tuple(t.beam_direction),
            beam_directions={k: tuple(v) for k, v in overrides.items() if v is not None},
        )
        lasers = tuple(
            LaserField(lab, s.rabi * 1e6, s.detuning * 1e6, tuple(s.polarization), tuple(s.propagation),
                       s.linewidth * 1e6)
            for lab, s in ((lab, self.lasers[lab]) for lab in LASER_LABELS)
        )
        z = self.zeeman
        zeeman = ZeemanStructure(z.larmor * 1e6, tuple(z.direction), {"S": z.g_S, "P": z.g_P, "D": z.g_D})
        decay = DecayConfig(self.decay.total_rate * 1e6, self.decay.branching_s)
        return Scenario(trap, zeeman, decay, lasers, self.run.rabi_convention, self.run.mode, self.run.ions)

    # serialization

    def to_dict(self) -> dict:
        out = {name: asdict(getattr(self, name)) for name in ("trap", "zeeman", "decay", "run")}
        out["lasers"] = {lab: asdict(s) for lab, s in self.lasers.items()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        def build(klass, values, where):
            values = dict(values or {})
            names = {f.name: f for f in fields(klass)}
            unknown = set(values) - set(names)
            if unknown:
                raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
            return klass(**{k: _coerce(names[k], v, f"{where}.{k}") for k, v in values.items()})

        unknown = set(d) - {"trap", "lasers", "zeeman", "decay", "run"}
        if unknown:
            raise ConfigError(f"unknown sections {sorted(unknown)}")
        lasers = _default_lasers()
        for lab, vals in (d.get("lasers") or {}).items():
            if lab not in LASER_LABELS:
                raise ConfigError(f"unknown laser {lab!r}")
            merged = {**asdict(lasers[lab]), **vals}
            lasers[lab] = build(LaserSection, merged, f"laser {lab}")
        return cls(
            trap=build(TrapSection, d.get("trap"), "trap"),
            lasers=lasers,
            zeeman=build(ZeemanSection, d.get("zeeman"), "zeeman"),
            decay=build(DecaySection, d.get("decay"), "decay"),
            run=build(RunSection, d.get("run"), "run"),
        )

    def to_ini(self) -> str:
        lines = []

        def section(name, obj):
            lines.append(f"[{name}]")
            for f in fields(obj):
                v = getattr(obj, f.name)
                if v is None:
                    continue
                if isinstance(v, (tuple, list)):
                    v = ", ".join(repr(float(x)) for x in v)
                elif isinstance(v, float):
                    v = repr(v)
                lines.append(f"{f.name} = {v}")
            lines.append("")

        section("trap", self.trap)
        for lab in LASER_LABELS:
            section(f"laser {lab}", self.lasers[lab])
        section("zeeman", self.zeeman)
        section("decay", self.decay)
        section("run", self.run)
        return "\n".join(lines)


def _coerce(f, value, where):
    """Convert a raw value (string from INI, or JSON value) to the field's type."""
    typ = str(f.type)
    try:
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
            if "Optional" in typ:
                return None
            raise ValueError("a value is required")
        if "tuple" in typ:
            vec = value
            if isinstance(value, str):
                vec = [x for x in re.split(r"[,\s]+", value.strip().strip("()[]")) if x]
            vec = tuple(float(x) for x in vec)
            if len(vec) != 3:
                raise ValueError(f"expected 3 components, got {len(vec)}")
            return vec
        if "bool" in typ:
            if isinstance(value, bool):
                return value
            low = str(value).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if "int" in typ:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"not an integer: {value!r}")
            return int(value)
        if "float" in typ:
            x = float(value)
            if not math.isfinite(x):
                raise ValueError(f"not finite: {value!r}")
            return x
        return str(value).strip()
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from None


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for error messages."""
    out = {}
    sec = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            sec = m.group(1).strip()
            out[(sec, None)] = i
        elif sec and s and s[0] not in "#;" and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, 1)[0].strip()
            out[(sec, key)] = i
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        lineno = getattr(err, "lineno", None)
        msg = str(err).splitlines()[0].split("]: ", 1)[-1]
        if getattr(err, "errors", None):
            lineno, bad = err.errors[0]
            msg = f"cannot parse line {bad}"
        where = f"{source}:{lineno}" if lineno else source
        raise ConfigError(f"{where}: {msg}") from None
    lines = _key_lines(text)
    data = {"lasers": {}}
    sections = {f"laser {lab}": ("lasers", lab) for lab in LASER_LABELS}
    klasses = {"trap": TrapSection, "zeeman": ZeemanSection, "decay": DecaySection, "run": RunSection}
    for sec in parser.sections():
        norm = " ".join(sec.split())
        if norm in sections:
            allowed = {f.name for f in fields(LaserSection)}
        elif norm in klasses:
            allowed = {f.name for f in fields(klasses[norm])}
        else:
            raise ConfigError(f"{source}:{lines.get((sec, None), '?')}: unknown section [{sec}]")
        values = dict(parser.items(sec))
        for key in values:
            if key not in allowed:
                raise ConfigError(
                    f"{source}:{lines.get((sec, key), '?')}: unknown key {key!r} in [{sec}]; "
                    f"allowed: {', '.join(sorted(allowed))}"
                )
        if norm in sections:
            data["lasers"][sections[norm][1]] = values
        else:
            data[norm] = values
    try:
        return RunConfig.from_dict(data)
    except ConfigError as err:
        msg = str(err)
        m = re.match(r"(laser \d+|trap|zeeman|decay|run)\.(\w+): ", msg)
        if m:
            sec, key = m.groups()
            line = next((n for (s, k), n in lines.items() if k == key and " ".join(s.split()) == sec), "?")
            msg = f"{source}:{line}: {msg}"
        else:
            msg = f"{source}: {msg}"
        raise ConfigError(msg) from None


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err.strerror}") from None
    return parse_config(text, path)
