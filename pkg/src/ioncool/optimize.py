"""Random search over laser parameters for the lowest phonon number, and detuning scans.

Heating points score +inf. The robust objective averages ``nbar`` over the
3 x 3 stencil where both detunings are shifted by -drift, 0, +drift, so a
single heating neighbour rules a point out.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import constants as C
from .cooling import COOLING
from .errors import IoncoolError, NoCoolingRegionError
from .scenario import PARAMS, Scenario
from .spectra import excitation_spectrum

OBJECTIVES = ("nbar", "robust_nbar")
SCAN_COLUMNS = (
    "detuning_MHz", "p_pop", "S_minus", "S_plus", "D", "A_plus", "A_minus",
    "W_per_s", "nbar", "E_ex_ueV", "phase",
)

_DEFAULT_BOUNDS = {
    "rabi_493": (0.0, 100e6),
    "rabi_650": (0.0, 100e6),
    "detuning_493": (-60e6, 0.0),
    "detuning_650": (-60e6, 0.0),
}


@dataclass(frozen=True)
class SearchSpace:
    """Closed intervals (cyclic Hz) for the four laser parameters."""

    bounds: dict = field(default_factory=lambda: dict(_DEFAULT_BOUNDS))
    samples: int = 1000
    seed: int = 0
    mode: str = "x~"
    drift: float = 1e6
    allow_positive_detuning: bool = False

    def __post_init__(self):
        if set(self.bounds) != set(PARAMS):
            raise ValueError(f"bounds must cover exactly {PARAMS}")
        for k, (lo, hi) in self.bounds.items():
            if not lo <= hi:
                raise ValueError(f"empty interval for {k}: [{lo}, {hi}]")
            if k.startswith("rabi") and lo < 0:
                raise ValueError(f"{k}: Rabi frequencies must be >= 0")
            if k.startswith("detuning") and hi > 0 and not self.allow_positive_detuning:
                raise ValueError(f"{k}: positive detuning excluded (set allow_positive_detuning)")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.drift < 0:
            raise ValueError("drift must be >= 0")

    def draw(self) -> np.ndarray:
        """All samples as an (N, 4) array in ``PARAMS`` order; PCG64 stream from ``seed``."""
        rng = np.random.Generator(np.random.PCG64(self.seed))
        lo = np.array([self.bounds[k][0] for k in PARAMS])
        hi = np.array([self.bounds[k][1] for k in PARAMS])
        return lo + (hi - lo) * rng.random((self.samples, len(PARAMS)))


def nbar(scn: Scenario, params: dict, mode: str = None) -> float:
    """Steady-state phonon number, +inf when the lasers heat or do not cool."""
    try:
        rep = scn.with_params(**params).report(mode, check_unique=False)
    except IoncoolError:
        return math.inf
    return rep.nbar if rep.status == COOLING else math.inf


def robust_objective(scn: Scenario, params: dict, drift: float = 1e6, mode: str = None) -> float:
    """Mean nbar over the nine detuning combinations offset by {-drift, 0, +drift}."""
    return _robust(scn, params, drift, mode)[0]


def _robust(scn, params, drift, mode):
    vals = []
    for a in (-drift, 0.0, drift):
        for b in (-drift, 0.0, drift):
            p = dict(params)
            p["detuning_493"] = params["detuning_493"] + a
            p["detuning_650"] = params["detuning_650"] + b
            vals.append(nbar(scn, p, mode))
    mean = math.inf if not all(map(math.isfinite, vals)) else float(np.mean(vals))
    return mean, vals


@dataclass
class LogEntry:
    index: int
    params: dict
    objective: float
    cooling_rate: float
    a_plus: float
    a_minus: float


@dataclass
class OptimizationResult:
    best_params: dict
    best_objective: float
    objective: str
    log: list
    heating_samples: int
    seed: int
    mode: str
    refined: bool = False

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "mode": self.mode,
            "seed": self.seed,
            "best_params": self.best_params,
            "best_objective": self.best_objective,
            "heating_samples": self.heating_samples,
            "samples": len(self.log),
            "refined": self.refined,
        }

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", *(f"{k}_MHz" for k in PARAMS), "objective", "W_per_s", "A_plus", "A_minus"])
        for e in self.log:
            w.writerow([e.index, *(f"{e.params[k] / 1e6:.9g}" for k in PARAMS),
                        f"{e.objective:.12g}", f"{e.cooling_rate:.12g}", f"{e.a_plus:.12g}", f"{e.a_minus:.12g}"])
        return buf.getvalue()


def _evaluate(args):
    scn, params, objective, drift, mode, index = args
    try:
        rep = scn.with_params(**params).report(mode, check_unique=False)
        w, ap, am = rep.cooling_rate, rep.a_plus, rep.a_minus
        plain = rep.nbar if rep.status == COOLING else math.inf
    except IoncoolError:
        w = ap = am = math.nan
        plain = math.inf
    if objective == "robust_nbar":
        value = _robust(scn, params, drift, mode)[0] if math.isfinite(plain) else math.inf
    else:
        value = plain
    return LogEntry(index, params, value, w, ap, am)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(fn, items, chunksize=16))
    return [fn(it) for it in items]


def random_search(
    scn: Scenario,
    space: SearchSpace,
    objective: str = "nbar",
    refine: bool = False,
    workers: int = 1,
) -> OptimizationResult:
    """Uniform random search; ties go to the lowest sample index."""
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    draws = space.draw()
    jobs = [(scn, dict(zip(PARAMS, map(float, row))), objective, space.drift, space.mode, i)
            for i, row in enumerate(draws)]
    log = _map(_evaluate, jobs, workers)
    heating = sum(1 for e in log if not math.isfinite(e.objective))
    values = np.array([e.objective for e in log])
    result = OptimizationResult({}, math.inf, objective, log, heating, space.seed, space.mode)
    if heating == len(log):
        raise NoCoolingRegionError("no cooling region found", result=result)
    best = int(np.argmin(values))  # first occurrence on ties
    result.best_params = dict(log[best].params)
    result.best_objective = float(values[best])
    if refine:
        p, v = coordinate_descent(scn, result.best_params, space, objective)
        if v < result.best_objective:
            result.best_params, result.best_objective = p, v
        result.refined = True
    return result


def coordinate_descent(scn, params, space, objective="nbar", step=0.05, min_step=1e-3, max_rounds=50):
    """Local refinement: try +-step (relative to each box width) along every axis."""

    def f(p):
        if objective == "robust_nbar":
            return robust_objective(scn, p, space.drift, space.mode)
        return nbar(scn, p, space.mode)

    best = dict(params)
    fbest = f(best)
    width = {k: (hi - lo) or 1.0 for k, (lo, hi) in space.bounds.items()}
    rounds = 0
    while step >= min_step and rounds < max_rounds:
        rounds += 1
        improved = False
        for k in PARAMS:
            lo, hi = space.bounds[k]
            for sgn in (-1, 1):
                trial = dict(best)
                trial[k] = min(max(best[k] + sgn * step * width[k], lo), hi)
                ft = f(trial)
                if ft < fbest:
                    best, fbest, improved = trial, ft, True
        if not improved:
            step /= 2
    return best, fbest


@dataclass
class ScanRow:
    detuning: float
    p_pop: float
    s_minus: float
    s_plus: float
    diffusion: float
    a_plus: float
    a_minus: float
    cooling_rate: float
    nbar: Optional[float]
    energy: Optional[float]
    phase: str
    status: str
    robust_nbar: Optional[float] = None
    error: str = ""


@dataclass
class ScanResult:
    axis: str
    mode: str
    rows: list

    @property
    def detunings(self) -> np.ndarray:
        return np.array([r.detuning for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows], float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        robust = any(r.robust_nbar is not None for r in self.rows)
        w.writerow([*SCAN_COLUMNS, *(["robust_nbar"] if robust else [])])

        def fmt(x):
            return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.10g}"

        for r in self.rows:
            e_uev = None if r.energy is None else r.energy / C.E_CHARGE * 1e6
            phase = f"error:{r.error}" if r.error else r.phase
            row = [f"{r.detuning / 1e6:.6f}", fmt(r.p_pop), fmt(r.s_minus), fmt(r.s_plus), fmt(r.diffusion),
                   fmt(r.a_plus), fmt(r.a_minus), fmt(r.cooling_rate), fmt(r.nbar), fmt(e_uev), phase]
            if robust:
                row.append(fmt(r.robust_nbar))
            w.writerow(row)
        return buf.getvalue()


def _scan_point(args):
    scn, axis, value, mode, drift = args
    key = f"detuning_{axis}"
    try:
        s = scn.with_params(**{key: value})
        rep = s.report(mode, check_unique=False)
    except IoncoolError as err:
        nan = math.nan
        return ScanRow(value, nan, nan, nan, nan, nan, nan, nan, None, None, "", "error", None, str(err))
    robust = None
    if drift is not None:
        robust = robust_objective(scn, s.params, drift, mode)
    return ScanRow(value, rep.excited_population, rep.s_minus, rep.s_plus, rep.diffusion, rep.a_plus,
                   rep.a_minus, rep.cooling_rate, rep.nbar, rep.energy, rep.phase, rep.status, robust)


def scan_values(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid from ``start`` to ``stop``; a zero-width range is one point."""
    if start == stop:
        return np.array([float(start)])
    if step <= 0:
        raise ValueError("scan step must be positive")
    n = int(math.floor(abs(stop - start) / step + 1e-9)) + 1
    return start + np.sign(stop - start) * step * np.arange(n)


def detuning_scan(
    scn: Scenario,
    values: Sequence[float],
    axis: str = "650",
    mode: str = None,
    robust_drift: Optional[float] = None,
    workers: int = 1,
) -> ScanResult:
    """Cooling report along one detuning axis (cyclic Hz); failures are recorded per row."""
    mode = mode or scn.mode
    jobs = [(scn, axis, float(v), mode, robust_drift) for v in values]
    rows = _map(_scan_point, jobs, workers)
    return ScanResult(axis, mode, rows)


def fluorescence_scan(scn: Scenario, values: Sequence[float], axis: str = "650"):
    return excitation_spectrum(scn, values, axis)
