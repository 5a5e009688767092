"""Zeeman-resolved eight-level model of Ba+ (S1/2, P1/2, D3/2).

The internal dynamics is written in a frame rotating with both lasers, so the
Hamiltonian is time independent: S sublevels sit at the 493 nm detuning, D
sublevels at the 650 nm detuning, P at zero, each shifted by its Zeeman energy.
A laser couples lower and upper sublevels as ``c * (sigma_plus + h.c.)`` where
``sigma_plus`` carries Clebsch-Gordan and polarization factors. With the default
``"oscillation"`` convention ``c = Omega / 2``, i.e. ``Omega`` is the Rabi
oscillation frequency of a reduced (CG = 1) transition; the ``"coupling"``
convention takes ``c = Omega``. All rates and energies inside an
:class:`InternalModel` are angular (rad/s); user-facing :class:`LaserField`
and :class:`ZeemanStructure` values are cyclic (Hz).

Density matrices are vectorized row-major, ``rho.reshape(-1)``, so that
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import constants as C
from .angular import dipole_cg
from .errors import ConfigError, NonUniqueSteadyStateError, NumericalError

LASER_TRANSITIONS = {"493": ("S", "P"), "650": ("D", "P")}
EXCITED = "P"


@dataclass(frozen=True)
class Level:
    manifold: str
    j: Fraction
    m: Fraction

    def __str__(self):
        return f"{self.manifold}({self.m:+})"


@dataclass(frozen=True)
class LaserField:
    """A laser driving one transition. ``rabi`` and ``detuning`` are cyclic Hz."""

    label: str
    rabi: float
    detuning: float
    polarization: tuple = (1.0, 0.0, 0.0)
    propagation: tuple = (0.0, 1.0, 0.0)
    linewidth: float = 0.0

    def __post_init__(self):
        if self.label not in LASER_TRANSITIONS:
            raise ConfigError(f"unknown laser {self.label!r}; expected one of {list(LASER_TRANSITIONS)}")
        if not (self.rabi >= 0 and np.isfinite(self.rabi)):
            raise ConfigError(f"rabi frequency of laser {self.label} must be >= 0")
        if not np.isfinite(self.detuning) or not self.linewidth >= 0:
            raise ConfigError(f"laser {self.label}: bad detuning or linewidth")
        eps = np.asarray(self.polarization, complex)
        k = np.asarray(self.propagation, float)
        if abs(np.linalg.norm(eps) - 1) > 1e-9 or abs(np.linalg.norm(k) - 1) > 1e-9:
            raise ConfigError(f"laser {self.label}: polarization and propagation must be unit vectors")
        if abs(np.dot(k, eps)) > 1e-9:
            raise ConfigError(f"laser {self.label}: polarization has a longitudinal component")

    def with_(self, **kw) -> "LaserField":
        return replace(self, **kw)


@dataclass(frozen=True)
class ZeemanStructure:
    """Magnetic field as Larmor frequency mu_B B / hbar (cyclic Hz) plus Lande factors."""

    larmor: float = 7.7e6
    direction: tuple = (0.0, 0.0, 1.0)
    g: Mapping[str, float] = field(default_factory=lambda: {"S": 2.0, "P": 2 / 3, "D": 4 / 5})

    def __post_init__(self):
        if abs(np.linalg.norm(self.direction) - 1) > 1e-9:
            raise ConfigError("field direction must be a unit vector")
        missing = {"S", "P", "D"} - set(self.g)
        if missing:
            raise ConfigError(f"missing Lande factors for {sorted(missing)}")


@dataclass(frozen=True)
class DecayConfig:
    """Total P1/2 decay rate (cyclic Hz) and the fraction going to S1/2."""

    total_rate: float = C.P_DECAY_RATE_MHZ * 1e6
    branching_s: float = C.P_BRANCHING_S

    def __post_init__(self):
        if not self.total_rate > 0 or not 0 <= self.branching_s <= 1:
            raise ConfigError("decay: need total_rate > 0 and 0 <= branching_s <= 1")


@dataclass(frozen=True)
class DriveChannel:
    lower: int
    upper: int
    laser: str
    amplitude: complex  # c_l * CG * polarization component, rad/s


@dataclass(frozen=True)
class DecayChannel:
    upper: int
    lower: int
    rate: float  # 2 gamma, 1/s
    character: str  # "pi" or "sigma"
    transition: str  # laser label whose wavelength the photon carries

    @property
    def alpha(self) -> float:
        """Second moment of the emission pattern along the quantization axis."""
        return 0.2 if self.character == "pi" else 0.4


@dataclass(frozen=True, eq=False)
class InternalModel:
    levels: tuple
    hamiltonian: np.ndarray  # rad/s
    drives: tuple
    decays: tuple
    liouvillian: np.ndarray
    laser_ops: Mapping[str, np.ndarray]  # dimensionless sigma_plus per laser
    coupling: Mapping[str, float]  # drive coefficient c_l of c_l (sigma+ + sigma-), rad/s
    dephasing: tuple = ()  # (rate, projector) pairs

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def excited(self) -> np.ndarray:
        return np.array([i for i, lv in enumerate(self.levels) if lv.manifold == EXCITED], int)

    def projector(self, manifold: str) -> np.ndarray:
        return np.diag([1.0 if lv.manifold == manifold else 0.0 for lv in self.levels])

    @property
    def total_decay(self) -> float:
        """Total decay rate out of the excited manifold, 1/s."""
        up = self.excited[0]
        return sum(d.rate for d in self.decays if d.upper == up)

    @property
    def min_decay(self) -> float:
        return min(d.rate for d in self.decays)

    def detuning_generator(self, manifold: str) -> np.ndarray:
        """d L / d(shift of ``manifold``'s energy): the commutator superoperator."""
        return commutator_super(self.projector(manifold))


def spherical_components(vec, axis) -> dict:
    """Components eps_q (q = -1, 0, +1) of ``vec`` in the spherical basis about ``axis``."""
    b = np.asarray(axis, float)
    b = b / np.linalg.norm(b)
    trial = np.array([1.0, 0, 0]) if abs(b[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = trial - (trial @ b) * b
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(b, e1)
    basis = {1: -(e1 + 1j * e2) / np.sqrt(2), 0: b.astype(complex), -1: (e1 - 1j * e2) / np.sqrt(2)}
    v = np.asarray(vec, complex)
    return {q: complex(np.vdot(e, v)) for q, e in basis.items()}


def barium_levels() -> tuple:
    half, three_half = Fraction(1, 2), Fraction(3, 2)
    levels = [Level("S", half, m) for m in (-half, half)]
    levels += [Level("P", half, m) for m in (-half, half)]
    levels += [Level("D", three_half, Fraction(m, 2)) for m in (-3, -1, 1, 3)]
    return tuple(levels)


_LEVELS = barium_levels()


def commutator_super(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i [h, rho]."""
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator_super(jump: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> J rho J^+ - {J^+ J, rho}/2."""
    n = jump.shape[0]
    eye = np.eye(n)
    jj = jump.conj().T @ jump
    return np.kron(jump, jump.conj()) - 0.5 * (np.kron(jj, eye) + np.kron(eye, jj.T))


def assemble_liouvillian(hamiltonian, decays, dephasing=()) -> np.ndarray:
    n = hamiltonian.shape[0]
    lv = commutator_super(hamiltonian)
    for d in decays:
        jump = np.zeros((n, n))
        jump[d.lower, d.upper] = np.sqrt(d.rate)
        lv += dissipator_super(jump)
    for rate, proj in dephasing:
        lv += dissipator_super(np.sqrt(rate) * proj)
    return lv


@lru_cache(maxsize=None)
def _cg_table(lower_name: str, upper_name: str) -> tuple:
    """(lower index, upper index, q, CG) for every E1-allowed sublevel pair."""
    levels = barium_levels()
    out = []
    for lo, up in itertools.product(range(len(levels)), repeat=2):
        low, upp = levels[lo], levels[up]
        if low.manifold != lower_name or upp.manifold != upper_name:
            continue
        q = int(upp.m - low.m)
        cg = dipole_cg(low.j, low.m, upp.j, upp.m) if abs(q) <= 1 else 0.0
        if cg:
            out.append((lo, up, q, cg))
    return tuple(out)


@lru_cache(maxsize=32)
def _decay_part(decay: "DecayConfig"):
    """Decay channels of the Ba+ level scheme and their (read-only) superoperator."""
    levels = barium_levels()
    decays = tuple(_decay_channels(levels, decay))
    n = len(levels)
    sup = assemble_liouvillian(np.zeros((n, n), complex), decays)
    sup.setflags(write=False)
    return decays, sup


def _decay_channels(levels, decay: DecayConfig) -> list:
    total = C.TWO_PI * decay.total_rate
    branch = {"S": decay.branching_s, "D": 1 - decay.branching_s}
    label = {"S": "493", "D": "650"}
    out = []
    for u, up in enumerate(levels):
        if up.manifold != EXCITED:
            continue
        for lo, low in enumerate(levels):
            if low.manifold not in branch:
                continue
            cg = dipole_cg(low.j, low.m, up.j, up.m)
            if cg == 0 or branch[low.manifold] == 0:
                continue
            char = "pi" if up.m == low.m else "sigma"
            out.append(DecayChannel(u, lo, total * branch[low.manifold] * cg**2, char, label[low.manifold]))
    return out


RABI_CONVENTIONS = {"oscillation": 0.5, "coupling": 1.0}


def build_model(
    lasers: Sequence[LaserField],
    zeeman: ZeemanStructure = ZeemanStructure(),
    decay: DecayConfig = DecayConfig(),
    rabi_convention: str = "oscillation",
) -> InternalModel:
    """Assemble the eight-level model for one 493 nm and one 650 nm laser."""
    if rabi_convention not in RABI_CONVENTIONS:
        raise ConfigError(f"rabi_convention must be one of {list(RABI_CONVENTIONS)}")
    half = RABI_CONVENTIONS[rabi_convention]
    by_label = {}
    for las in lasers:
        if las.label in by_label:
            raise ConfigError(f"laser {las.label} given twice")
        by_label[las.label] = las
    if set(by_label) != set(LASER_TRANSITIONS):
        raise ConfigError(f"need exactly one 493 and one 650 laser, got {sorted(by_label)}")

    levels = _LEVELS
    n = len(levels)
    u = C.TWO_PI * zeeman.larmor
    offset = {"S": C.TWO_PI * by_label["493"].detuning, "P": 0.0, "D": C.TWO_PI * by_label["650"].detuning}
    ham = np.diag([offset[lv.manifold] + float(lv.m) * zeeman.g[lv.manifold] * u for lv in levels]).astype(complex)

    drives = []
    laser_ops = {}
    coupling = {}
    for label, las in by_label.items():
        lower_name, upper_name = LASER_TRANSITIONS[label]
        eps = spherical_components(las.polarization, zeeman.direction)
        op = np.zeros((n, n), complex)
        c = half * C.TWO_PI * las.rabi
        for lo, up, q, cg in _cg_table(lower_name, upper_name):
            factor = cg * eps[q]
            if abs(factor) < 1e-15:
                continue
            op[up, lo] = factor
            if c:
                drives.append(DriveChannel(lo, up, label, c * factor))
        laser_ops[label] = op
        coupling[label] = c
        ham += coupling[label] * (op + op.conj().T)

    decays, dissipator = _decay_part(decay)
    dephasing = []
    for label, las in by_label.items():
        if las.linewidth > 0:
            lower_name = LASER_TRANSITIONS[label][0]
            proj = np.diag([1.0 if lv.manifold == lower_name else 0.0 for lv in levels])
            dephasing.append((C.TWO_PI * las.linewidth, proj))
    lv = assemble_liouvillian(ham, (), dephasing) + dissipator
    return InternalModel(levels, ham, tuple(drives), decays, lv, laser_ops, coupling, tuple(dephasing))


def barium_model(
    rabi_493=46.2e6,
    rabi_650=59.0e6,
    detuning_493=-44.3e6,
    detuning_650=-60.0e6,
    larmor=7.7e6,
    decay: DecayConfig = DecayConfig(),
    rabi_convention: str = "oscillation",
    **laser_kw,
) -> InternalModel:
    """Convenience builder with the default geometry (both beams polarized perpendicular to B)."""
    lasers = [
        LaserField("493", rabi_493, detuning_493, **laser_kw),
        LaserField("650", rabi_650, detuning_650, **laser_kw),
    ]
    return build_model(lasers, ZeemanStructure(larmor=larmor), decay, rabi_convention)


def two_level_model(coupling: float, detuning: float, decay_rate: float) -> InternalModel:
    """Bare two-level atom (ground 0, excited 1), all arguments in rad/s.

    H = detuning |g><g| + coupling (sigma+ + sigma-); ``decay_rate`` is the full
    spontaneous rate 2 gamma. Used as an analytic reference for the multilevel
    machinery.
    """
    half = Fraction(1, 2)
    levels = (Level("S", half, half), Level("P", half, half))
    op = np.array([[0, 0], [1, 0]], complex)
    ham = np.diag([detuning, 0.0]).astype(complex) + coupling * (op + op.T)
    decays = (DecayChannel(1, 0, decay_rate, "pi", "493"),)
    drives = (DriveChannel(0, 1, "493", complex(coupling)),) if coupling else ()
    lv = assemble_liouvillian(ham, decays)
    return InternalModel(levels, ham, drives, decays, lv, {"493": op}, {"493": coupling})


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    residual: float
    condition: float = float("nan")

    @property
    def populations(self) -> np.ndarray:
        return self.rho.diagonal().real

    def population(self, model: InternalModel, manifold: str = EXCITED) -> float:
        return float(np.trace(model.projector(manifold) @ self.rho).real)


def trace_row(n: int) -> np.ndarray:
    return np.eye(n).reshape(-1).astype(complex)


def null_space_dimension(liouvillian: np.ndarray, rtol: float = 1e-10):
    """Dimension of ker L, the singular values and a basis of the kernel."""
    _, s, vh = np.linalg.svd(liouvillian)
    tol = rtol * max(s[0], 1.0)
    kernel = vh[s <= tol].conj()
    return int(np.sum(s <= tol)), s, kernel


def solve_steady(liouvillian: np.ndarray) -> np.ndarray:
    """Solve L rho = 0, Tr rho = 1 by replacing the first population row.

    Accepts a single ``(n^2, n^2)`` generator or a stack ``(k, n^2, n^2)``.
    Row 0 (the rho_00 equation) is redundant because Tr(L rho) = 0.
    """
    n2 = liouvillian.shape[-1]
    n = int(round(np.sqrt(n2)))
    bordered = np.array(liouvillian, copy=True)
    bordered[..., 0, :] = trace_row(n)
    rhs = np.zeros(bordered.shape[:-1], complex)
    rhs[..., 0] = 1.0
    vec = np.linalg.solve(bordered, rhs[..., None])[..., 0]
    rho = vec.reshape(*vec.shape[:-1], n, n)
    return 0.5 * (rho + np.swapaxes(rho, -1, -2).conj())


def steady_state(model: InternalModel, check_unique: bool = True, tol: float = 1e-10) -> SteadyState:
    """Unique stationary density matrix of the internal dynamics."""
    lv = model.liouvillian
    if check_unique:
        dim, s, kernel = null_space_dimension(lv)
        if dim > 1:
            raise NonUniqueSteadyStateError(
                f"Liouvillian has a {dim}-dimensional null space; steady state is not unique",
                null_space=kernel,
                singular_values=s,
            )
        cond = s[0] / s[-2] if s[-2] > 0 else np.inf
    else:
        cond = float("nan")
    try:
        rho = solve_steady(lv)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"steady-state system is singular ({err}); the steady state is not unique") from None
    scale = np.abs(lv).max()
    residual = float(np.linalg.norm(lv @ rho.reshape(-1)) / scale)
    if not np.isfinite(residual) or residual > tol:
        raise NumericalError(f"steady-state residual {residual:.3g} exceeds {tol:g}")
    return SteadyState(rho, residual, float(cond))


def lambda_pairs(zeeman: ZeemanStructure, pol_493=(1, 0, 0), pol_650=(1, 0, 0)) -> list:
    """(S level, D level) pairs connected through a common P sublevel."""
    levels = barium_levels()
    comps = {
        "493": spherical_components(pol_493, zeeman.direction),
        "650": spherical_components(pol_650, zeeman.direction),
    }

    def coupled(lower, upper, label):
        q = int(upper.m - lower.m)
        return abs(q) <= 1 and abs(comps[label][q] * dipole_cg(lower.j, lower.m, upper.j, upper.m)) > 1e-12

    pairs = []
    for p in (lv for lv in levels if lv.manifold == "P"):
        for s in (lv for lv in levels if lv.manifold == "S"):
            for d in (lv for lv in levels if lv.manifold == "D"):
                if coupled(s, p, "493") and coupled(d, p, "650") and (s, d) not in pairs:
                    pairs.append((s, d))
    return pairs


def dark_resonance_positions(
    zeeman: ZeemanStructure, detuning_493: float, pol_493=(1, 0, 0), pol_650=(1, 0, 0)
) -> list:
    """650 nm detunings (cyclic Hz) of the two-photon S-D resonances, sorted.

    Each Lambda-connected pair contributes Delta_493 + (m_S g_S - m_D g_D) * larmor.
    """
    pos = set()
    for s, d in lambda_pairs(zeeman, pol_493, pol_650):
        shift = (float(s.m) * zeeman.g["S"] - float(d.m) * zeeman.g["D"]) * zeeman.larmor
        pos.add(round(detuning_493 + shift, 6))
    return sorted(pos)
