"""Cooling and heating rates of one vibrational mode in the Lamb-Dicke limit.

Rates follow from the internal steady state alone. Phonon-number changing
rates are ``A+- = 2 (Re S(-+omega) + D)``, with ``S`` the one-sided spectrum of
the dipole force operator ``F = sum_l c_l eta_l sigma^y_l`` and ``D`` the
recoil diffusion of spontaneous emission.

Each of the two ions couples to a collective mode with ``eta / sqrt(2)``.
``CoolingReport`` therefore carries per-ion rates, and ``*_total`` fields for
both ions together (twice the per-ion value). ``nbar`` is a ratio and does
not care.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import constants as C
from .atom import InternalModel, SteadyState, steady_state
from .errors import ConfigError, NonUniqueSteadyStateError, NumericalError, SingularResolventError
from .trap import CrystalGeometry, Mode, TrapConfig, UNBOUNDED, UNDETERMINED, classify_motion

HEATING = "heating"
NO_COOLING = "no_cooling"
COOLING = "cooling"

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ModeSelection:
    """Mode frequency and its effective couplings to each laser and decay photon.

    ``couplings`` maps a laser label to the effective LDP (geometry factor and
    per-ion normalization included); ``recoil`` maps a transition label to the
    squared LDP of a photon of that wavelength without geometry factor,
    ``hbar k^2 / (2 m omega)``, with the same normalization.
    """

    label: str
    omega: float
    couplings: Mapping[str, float]
    recoil: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"mode frequency must be positive, got {self.omega}")
        vals = list(self.couplings.values()) + list(self.recoil.values())
        if not all(np.isfinite(vals)):
            raise ConfigError("mode couplings must be finite")
        for lab, eta in self.couplings.items():
            if eta != 0 and self.recoil.get(lab, 1.0) == 0:
                raise ConfigError(f"laser {lab}: nonzero LDP with zero recoil (geometry inconsistent)")

    @classmethod
    def from_mode(cls, mode: Mode, trap: TrapConfig, ions: int = 2) -> "ModeSelection":
        norm = 1 / math.sqrt(ions)
        couplings = {lab: norm * eta for lab, eta in mode.lamb_dicke.items()}
        recoil = {
            lab: norm**2 * C.HBAR * (C.TWO_PI / lam) ** 2 / (2 * trap.ion_mass * mode.omega)
            for lab, lam in trap.wavelengths.items()
        }
        return cls(mode.label, mode.omega, couplings, recoil)

    def scaled(self, c: float) -> "ModeSelection":
        """Every LDP multiplied by ``c``."""
        return ModeSelection(
            self.label,
            self.omega,
            {k: c * v for k, v in self.couplings.items()},
            {k: c * c * v for k, v in self.recoil.items()},
        )


def force_operator(model: InternalModel, mode: ModeSelection) -> np.ndarray:
    """F = sum_l c_l eta_l sigma^y_l with sigma^y = (sigma^+ - sigma^-)/i.

    ``c_l`` is the same drive coefficient that multiplies sigma^x_l in the
    Hamiltonian, so the recoil expansion stays consistent with the model.
    """
    n = model.dim
    f = np.zeros((n, n), complex)
    for lab, sp in model.laser_ops.items():
        c = model.coupling.get(lab, 0.0) * mode.couplings.get(lab, 0.0)
        if c:
            f += c * (sp - sp.conj().T) / 1j
    return f


def _left_vector(op: np.ndarray) -> np.ndarray:
    # Tr[A X] = sum_ij A_ji X_ij = vec(A.T) . vec(X)
    return op.T.reshape(-1)


def _source(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    mean = np.trace(op @ rho)
    return (op @ rho - mean * rho).reshape(-1)


def fluctuation_spectrum(
    model: InternalModel,
    ss: SteadyState,
    mode: ModeSelection,
    omega: float,
    report: Optional[dict] = None,
) -> complex:
    """S(omega) = int_0^inf e^{i omega t} <F(t) F(0)>_c dt via the resolvent.

    The stationary product <F>^2 only adds a pole at omega = 0 and is
    subtracted. If ``report`` is a dict, a regularization flag is stored in it.
    """
    if omega == 0:
        raise ValueError("omega must be nonzero")
    f = force_operator(model, mode)
    if not np.any(f):
        return 0j
    lv = model.liouvillian
    n2 = lv.shape[0]
    x = _source(f, ss.rho)
    a = _left_vector(f)
    mat = lv + 1j * omega * np.eye(n2)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        eps = 1e-6 * model.min_decay
        mat = mat - eps * np.eye(n2)
        cond2 = np.linalg.cond(mat)
        if not np.isfinite(cond2) or cond2 > _COND_LIMIT:
            ev = np.linalg.eigvals(lv)
            worst = ev[np.argmin(np.abs(ev + 1j * omega))]
            raise SingularResolventError(
                f"omega={omega:.6g} hits an undamped Liouvillian eigenvalue {worst:.6g}", eigenvalue=worst
            )
        if report is not None:
            report["regularized"] = eps
    y = np.linalg.solve(mat, x)
    return complex(-(a @ y))


def lindblad_rhs(model: InternalModel, rho: np.ndarray) -> np.ndarray:
    """d rho/dt = -i[H, rho] + sum_j (J rho J^+ - {J^+ J, rho}/2), matrix form."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    jumps = []
    for d in model.decays:
        j = np.zeros_like(h)
        j[d.lower, d.upper] = math.sqrt(d.rate)
        jumps.append(j)
    jumps.extend(math.sqrt(rate) * proj for rate, proj in model.dephasing)
    for j in jumps:
        jd = j.conj().T
        out += j @ rho @ jd - 0.5 * (jd @ j @ rho + rho @ jd @ j)
    return out


def master_equation_generator(model: InternalModel) -> np.ndarray:
    """Matrix of :func:`lindblad_rhs` on row-major vectorized density matrices."""
    n = model.dim
    cols = []
    for k in range(n * n):
        basis = np.zeros(n * n, complex)
        basis[k] = 1
        cols.append(lindblad_rhs(model, basis.reshape(n, n)).reshape(-1))
    return np.array(cols).T


def fluctuation_spectrum_oracle(
    model: InternalModel,
    ss: SteadyState,
    mode: ModeSelection,
    omega: float,
    t_max: float,
    dt: float,
    drift_tol: float = 1e-8,
) -> complex:
    """Same quantity as :func:`fluctuation_spectrum` by explicit time integration.

    The regression source B(t) = e^{Lt}(F rho - <F> rho) is carried in the
    co-rotating form C(t) = e^{i omega t} B(t), integrated with classical RK4
    together with the running integral of Tr[F C(t)]. The source is traceless
    and stays so; a drifting trace flags an unstable step.

    The generator is not the model's assembled superoperator: it is rebuilt
    column by column from the matrix form of the master equation, so the
    Kronecker-product assembly is checked as well.

    For a linear system one RK4 step is the fixed matrix polynomial
    ``R = 1 + M + M^2/2 + M^3/6 + M^4/24`` with ``M = dt (L + i omega)``, and the
    RK4 quadrature of the integrand over the step is ``a . dt (1 + M/2 + M^2/6
    + M^3/24) C``. Both are formed once; the loop is then one product per step.
    """
    f = force_operator(model, mode)
    if not np.any(f):
        return 0j
    lv = master_equation_generator(model)
    n2 = lv.shape[0]
    n = model.dim
    eye = np.eye(n2)
    m1 = dt * (lv + 1j * omega * eye)
    m2 = m1 @ m1
    m3 = m2 @ m1
    step = eye + m1 + m2 / 2 + m3 / 6 + m3 @ m1 / 24
    quad = _left_vector(f) @ (dt * (eye + m1 / 2 + m2 / 6 + m3 / 24))
    tr = np.eye(n).reshape(-1)
    c = _source(f, ss.rho)
    scale = np.abs(c).max()
    integral = 0j
    steps = int(math.ceil(t_max / dt))
    for k in range(steps):
        integral += quad @ c
        c = step @ c
        if k % 1024 == 0 and not np.isfinite(c).all():
            raise NumericalError("time integration diverged; reduce dt")
    if not np.isfinite(c).all() or abs(tr @ c) > drift_tol * scale:
        raise NumericalError(f"trace drift {abs(tr @ c):.3g} in regression integration; reduce dt")
    return complex(integral)


def diffusion_rate(model: InternalModel, ss: SteadyState, mode: ModeSelection) -> float:
    """D = sum over decay channels of gamma_l alpha_l eta_l^2 / (k_l.e)^2 <sigma+ sigma->."""
    total = 0.0
    for d in model.decays:
        rec = mode.recoil.get(d.transition, 0.0)
        if rec:
            total += 0.5 * d.rate * d.alpha * rec * ss.rho[d.upper, d.upper].real
    return total


@dataclass(frozen=True)
class CoolingReport:
    mode: str
    omega: float
    s_minus: float  # Re S(-omega), 1/s
    s_plus: float  # Re S(+omega)
    diffusion: float
    a_plus: float
    a_minus: float
    excited_population: float
    status: str  # cooling / heating / no_cooling
    phase: str
    regularized: float = 0.0
    ions: int = 2

    @property
    def cooling_rate(self) -> float:
        return self.a_minus - self.a_plus

    @property
    def a_plus_total(self) -> float:
        return self.ions * self.a_plus

    @property
    def a_minus_total(self) -> float:
        return self.ions * self.a_minus

    @property
    def cooling_rate_total(self) -> float:
        return self.ions * self.cooling_rate

    @property
    def nbar(self) -> Optional[float]:
        w = self.cooling_rate
        return self.a_plus / w if self.status == COOLING else None

    @property
    def energy(self) -> Optional[float]:
        """Mean motional energy hbar omega A+/(A- - A+), J (no zero-point term)."""
        nb = self.nbar
        return None if nb is None else C.HBAR * self.omega * nb

    @property
    def energy_with_zero_point(self) -> Optional[float]:
        nb = self.nbar
        return None if nb is None else C.HBAR * self.omega * (nb + 0.5)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "omega": self.omega,
            "S_minus": self.s_minus,
            "S_plus": self.s_plus,
            "D": self.diffusion,
            "A_plus": self.a_plus,
            "A_minus": self.a_minus,
            "W": self.cooling_rate,
            "A_plus_total": self.a_plus_total,
            "A_minus_total": self.a_minus_total,
            "W_total": self.cooling_rate_total,
            "nbar": self.nbar,
            "E_ex": self.energy,
            "E_ex_zero_point": self.energy_with_zero_point,
            "p_population": self.excited_population,
            "status": self.status,
            "phase": self.phase,
            "regularized": self.regularized,
        }


def _dark_report(model, mode, kernel, geom):
    """Report for a model without a unique steady state.

    Acceptable only if no stationary state scatters light (all drives idle);
    then there is neither cooling nor heating.
    """
    n = model.dim
    exc = model.excited
    for v in kernel:
        rho = v.reshape(n, n)
        if np.abs(rho[exc][:, exc]).max() > 1e-9 * max(np.abs(rho).max(), 1e-300):
            return None
    return CoolingReport(mode.label, mode.omega, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, NO_COOLING, UNDETERMINED)


def cooling_report(
    model: InternalModel,
    mode: ModeSelection,
    geometry: Optional[CrystalGeometry] = None,
    ss: Optional[SteadyState] = None,
    ions: int = 2,
    check_unique: bool = True,
) -> CoolingReport:
    """Assemble A+-, W, nbar and the motional phase for one mode."""
    if ss is None:
        try:
            ss = steady_state(model, check_unique=check_unique)
        except NonUniqueSteadyStateError as err:
            rep = _dark_report(model, mode, err.null_space, geometry)
            if rep is None:
                raise
            return rep
    p_exc = float(sum(ss.rho[i, i].real for i in model.excited))
    info = {}
    s_plus = fluctuation_spectrum(model, ss, mode, mode.omega, info).real
    s_minus = fluctuation_spectrum(model, ss, mode, -mode.omega, info).real
    dif = diffusion_rate(model, ss, mode)
    a_plus = 2 * (s_minus + dif)
    a_minus = 2 * (s_plus + dif)
    scale = max(abs(a_plus), abs(a_minus), 1e-300)
    for name, val in (("A+", a_plus), ("A-", a_minus)):
        if val < -1e-9 * scale:
            raise NumericalError(f"negative transition rate {name}={val:.6g}")
    a_plus, a_minus = max(a_plus, 0.0), max(a_minus, 0.0)
    w = a_minus - a_plus
    if a_plus == 0 and a_minus == 0:
        status = NO_COOLING
    elif w > 0:
        status = COOLING
    else:
        status = HEATING
    phase = UNBOUNDED if status == HEATING else UNDETERMINED
    if status == COOLING and geometry is not None:
        phase = classify_motion(C.HBAR * mode.omega * a_plus / w, geometry)
    return CoolingReport(
        mode.label, mode.omega, s_minus, s_plus, dif, a_plus, a_minus, p_exc, status, phase,
        info.get("regularized", 0.0), ions,
    )


def phonon_trajectory(report: CoolingReport, n0: float, times) -> np.ndarray:
    """<n>(t) solving d<n>/dt = -W <n> + A+ in closed form."""
    if n0 < 0:
        raise ValueError("n0 must be >= 0")
    t = np.asarray(times, float)
    w, ap = report.cooling_rate, report.a_plus
    if w == 0:
        return n0 + ap * t
    nss = ap / w
    return nss + (n0 - nss) * np.exp(-w * t)
