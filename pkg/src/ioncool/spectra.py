"""Excitation spectra of the eight-level ion and fits of measured spectra.

Along a detuning scan only the diagonal of the Hamiltonian moves, so the
Liouvillian is ``L0 + delta * G``; every point reuses one base generator.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import constants as C
from .atom import LASER_TRANSITIONS, trace_row
from .errors import ConfigError, FitError
from .scenario import Scenario

FIT_PARAMS = ("rabi_493", "rabi_650", "detuning_493", "larmor")
SPECTRUM_COLUMNS = ("detuning_MHz", "p_population", "fluorescence_rate_per_s")


@dataclass
class SpectrumScan:
    axis: str  # "650" or "493"
    detunings: np.ndarray  # cyclic Hz
    p_population: np.ndarray  # NaN where the solve failed
    fluorescence: np.ndarray  # 1/s
    errors: dict = field(default_factory=dict)  # index -> message

    def minima(self) -> np.ndarray:
        """Detunings of strict local minima of the P population."""
        return self.detunings[local_minima(self.p_population)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SPECTRUM_COLUMNS)
        for d, p, f in zip(self.detunings, self.p_population, self.fluorescence):
            w.writerow([f"{d / 1e6:.6f}", f"{p:.10g}", f"{f:.10g}"])
        return buf.getvalue()


def local_minima(y: np.ndarray) -> np.ndarray:
    """Indices of interior points lower than both neighbours (plateaus count once)."""
    y = np.asarray(y, float)
    idx = []
    i = 1
    while i < len(y) - 1:
        j = i
        while j + 1 < len(y) - 1 and y[j + 1] == y[i]:
            j += 1
        if y[i - 1] > y[i] and y[j + 1] > y[j]:
            idx.append((i + j) // 2)
        i = j + 1
    return np.array(idx, int)


def _populations(scn: Scenario, axis: str, detunings: np.ndarray):
    """Total P population for each detuning of laser ``axis``; NaN on failure."""
    model = scn.model()
    base = scn.laser(axis).detuning
    lower = LASER_TRANSITIONS[axis][0]
    gen = C.TWO_PI * model.detuning_generator(lower)
    n = model.dim
    stack = model.liouvillian[None, :, :] + (np.asarray(detunings) - base)[:, None, None] * gen
    exc = model.excited
    pops = np.full(len(detunings), np.nan)
    errors = {}
    bordered = stack.copy()
    bordered[:, 0, :] = trace_row(n)
    rhs = np.zeros(n * n, complex)
    rhs[0] = 1
    scale = np.abs(stack).max(axis=(1, 2))
    for i in range(len(detunings)):
        try:
            vec = np.linalg.solve(bordered[i], rhs)
        except np.linalg.LinAlgError as err:
            errors[i] = f"singular steady-state system: {err}"
            continue
        resid = np.linalg.norm(stack[i] @ vec) / scale[i]
        if not np.isfinite(resid) or resid > 1e-9:
            errors[i] = f"steady-state residual {resid:.3g}"
            continue
        rho = vec.reshape(n, n)
        pops[i] = float(sum(rho[k, k].real for k in exc))
    return pops, errors, model


def excitation_spectrum(scn: Scenario, detunings: Sequence[float], axis: str = "650") -> SpectrumScan:
    """P1/2 population and fluorescence rate while scanning one laser's detuning (cyclic Hz)."""
    if axis not in LASER_TRANSITIONS:
        raise ConfigError(f"scan axis must be one of {list(LASER_TRANSITIONS)}")
    det = np.asarray(detunings, float)
    if det.ndim != 1 or len(det) < 2:
        raise ConfigError("an excitation spectrum needs at least 2 scan points")
    pops, errors, model = _populations(scn, axis, det)
    return SpectrumScan(axis, det, pops, model.total_decay * pops, errors)


def read_spectrum(path_or_text: str, is_text: bool = False):
    """Two-column delimited data (detuning in MHz, counts) -> (Hz array, counts array)."""
    text = path_or_text if is_text else open(path_or_text).read()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.replace(",", " ").replace(";", " ").split() if p]
        try:
            x, y = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            if not rows:
                continue  # header
            raise ConfigError(f"line {lineno}: expected two numeric columns, got {line!r}")
        rows.append((x * 1e6, y))
    if not rows:
        raise ConfigError("no data rows found")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


@dataclass
class FitResult:
    params: dict  # FIT_PARAMS, cyclic Hz
    amplitude: float  # counts per unit P population
    offset: float
    rss: float
    half_widths: dict  # local quadratic approximation, cyclic Hz
    iterations: int
    converged: bool
    history: list  # best rss after each iteration

    def scenario(self, base: Scenario) -> Scenario:
        return base.with_params(**self.params)


def _linear_fit(p: np.ndarray, y: np.ndarray):
    """Least-squares amplitude and offset for y ~ a p + b."""
    design = np.column_stack([p, np.ones_like(p)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ np.array([a, b])
    return a, b, float(r @ r)


def fit_spectrum(
    detunings: Sequence[float],
    counts: Sequence[float],
    guess: dict,
    base: Scenario = None,
    fixed: Optional[dict] = None,
    max_iter: int = 500,
    xtol: float = 1e-4,
) -> FitResult:
    """Fit rabi_493, rabi_650, detuning_493 and larmor to a 650 nm excitation spectrum.

    The spectrum model is ``amplitude * P(detuning) + offset``. Amplitude and
    offset enter linearly and are solved exactly for each trial; the four
    nonlinear parameters are found by Nelder-Mead in coordinates scaled by the
    initial guess, so ``xtol`` is a relative step tolerance.
    """
    base = base or Scenario()
    fixed = dict(fixed or {})
    x = np.asarray(detunings, float)
    y = np.asarray(counts, float)
    if len(x) != len(y) or len(x) < 20:
        raise FitError("need at least 20 data points")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise FitError("counts must be positive and finite")
    if np.ptp(y) == 0:
        raise FitError("data have zero variance")
    free = [k for k in FIT_PARAMS if k not in fixed]
    scale = np.array([guess[k] if guess[k] != 0 else 1e6 for k in free], float)

    def unpack(z):
        vals = dict(fixed)
        vals.update({k: v for k, v in zip(free, np.asarray(z) * scale)})
        return vals

    def pops(vals):
        if vals["rabi_493"] < 0 or vals["rabi_650"] < 0:
            return None
        scn = base.with_params(**vals)
        p, errors, _ = _populations(scn, "650", x)
        return None if errors else p

    memo = {}

    def objective(z):
        key = np.asarray(z, float).tobytes()
        if key not in memo:
            p = pops(unpack(z))
            memo[key] = np.inf if p is None else _linear_fit(p, y)[2]
        return memo[key]

    history = []
    best = {"rss": np.inf, "z": np.ones(len(free))}

    def track(zk):
        f = objective(zk)
        if f < best["rss"]:
            best.update(rss=f, z=np.array(zk))
        history.append(best["rss"])

    z0 = np.ones(len(free))
    res = minimize(
        objective, z0, method="Nelder-Mead", callback=track,
        options={"maxiter": max_iter, "xatol": xtol, "fatol": 1e-12 * max(float(y @ y), 1e-300),
                 "initial_simplex": _initial_simplex(z0)},
    )
    if res.fun <= best["rss"]:
        best.update(rss=res.fun, z=res.x)
    vals = unpack(best["z"])
    if not res.success:
        raise FitError(f"fit did not converge after {res.nit} iterations: {res.message}", best=vals)
    p = pops(vals)
    a, b, rss = _linear_fit(p, y)
    widths = _half_widths(objective, best["z"], scale, rss, len(y), len(free) + 2)
    for k in ("rabi_493", "rabi_650"):
        vals[k] = abs(vals[k])
    return FitResult(
        {k: float(vals[k]) for k in FIT_PARAMS}, float(a), float(b), rss,
        {k: w for k, w in zip(free, widths)}, int(res.nit), True, history,
    )


def _initial_simplex(z0, step=0.05):
    simplex = [z0]
    for i in range(len(z0)):
        z = z0.copy()
        z[i] *= 1 + step
        simplex.append(z)
    return np.array(simplex)


def _half_widths(objective, z, scale, rss, n_data, n_par, h=1e-3):
    """1-sigma half widths from the finite-difference Hessian of the RSS."""
    k = len(z)
    f0 = objective(z)
    hess = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.eye(k)[i] * h
            ej = np.eye(k)[j] * h
            val = (objective(z + ei + ej) - objective(z + ei - ej) - objective(z - ei + ej) + objective(z - ei - ej)) / (4 * h * h)
            hess[i, j] = hess[j, i] = val
    dof = max(n_data - n_par, 1)
    sigma2 = rss / dof
    try:
        cov = 2 * sigma2 * np.linalg.inv(hess)
        widths = np.sqrt(np.clip(np.diag(cov), 0, None)) * np.abs(scale)
    except np.linalg.LinAlgError:
        widths = np.full(k, math.inf)
    if not np.isfinite(f0):
        widths = np.full(k, math.inf)
    return [float(w) for w in widths]
