"""Command-line front end.

    ioncool modes
    ioncool cool --mode x~
    ioncool spectrum --scan 650:-70:30:0.2 --out spec
    ioncool fit data.txt
    ioncool scan --scan 650:-70:30:0.1 --robust 1 --out scan
    ioncool optimize --seed 7 --out opt

``--out BASE`` writes ``BASE.csv`` (for tabular commands) and ``BASE.json``.
Failures print a single ``error code=... module=... message=...`` line to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import constants as C
from .config import RunConfig, ScanSpec, load_config
from .cooling import NO_COOLING
from .errors import ConfigError, IoncoolError, NoCoolingRegionError, UsageError
from .optimize import SearchSpace, detuning_scan, random_search, scan_values
from .scenario import PARAMS
from .spectra import FIT_PARAMS, excitation_spectrum, fit_spectrum, read_spectrum
from .trap import MODE_LABELS, crystal_geometry

DEFAULT_SCAN = "650:-70:30:0.2"
EXIT_USAGE = 2
EXIT_FAILURE = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--mode", choices=MODE_LABELS, help="vibrational mode label")
    common.add_argument("--scan", help="axis:from:to:step in MHz, e.g. 650:-70:30:0.2")
    common.add_argument("--seed", type=int, help="seed for the random search (u64)")
    common.add_argument("--out", help="output base path; writes BASE.csv and BASE.json")
    common.add_argument("--robust", type=float, metavar="DRIFT_MHZ", help="nine-point drift average step")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from output files")
    common.add_argument("--paper-defaults", action="store_true", help="use the published fitted parameters")

    p = _Parser(prog="ioncool", description="Laser cooling of two trapped Ba+ ions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("modes", parents=[common], help="mode frequencies, Lamb-Dicke parameters, barriers")
    sub.add_parser("spectrum", parents=[common], help="excitation spectrum along a detuning axis")
    fit = sub.add_parser("fit", parents=[common], help="fit a measured 650 nm excitation spectrum")
    fit.add_argument("data", help="two-column text file: detuning (MHz), counts")
    sub.add_parser("cool", parents=[common], help="cooling report for one mode")
    sub.add_parser("scan", parents=[common], help="cooling report along a detuning axis")
    opt = sub.add_parser("optimize", parents=[common], help="random search for the lowest phonon number")
    opt.add_argument("--samples", type=int, help="number of random samples")
    opt.add_argument("--refine", action="store_true", help="coordinate-descent polish of the winner")
    opt.add_argument("--workers", type=int, help="worker processes")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.paper_defaults:
        cfg = cfg.with_paper_defaults()
    run = cfg.run
    updates = {}
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.scan is not None:
        updates["scan"] = str(ScanSpec.parse(args.scan))
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.robust is not None:
        updates["robust"] = args.robust
    if args.out is not None:
        updates["out"] = args.out
    for key in ("samples", "refine", "workers"):
        val = getattr(args, key, None)
        if val not in (None, False):
            updates[key] = val
    if updates:
        cfg = RunConfig(cfg.trap, cfg.lasers, cfg.zeeman, cfg.decay, replace(run, **updates))
    return cfg


# output helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars to float, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def summary_document(command: str, cfg: RunConfig, results: dict, timestamp: bool = True) -> str:
    doc = {"command": command, "version": __version__}
    if timestamp:
        doc["generated"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    doc["config"] = cfg.to_dict()
    doc["results"] = results
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def load_summary(text: str):
    """Parse a summary document back into (RunConfig, results)."""
    doc = json.loads(text)
    return RunConfig.from_dict(doc["config"]), doc["results"]


def _base(path: str) -> str:
    root, ext = os.path.splitext(path)
    return root if ext.lower() in (".csv", ".json") else path


def _write(cfg, command, results, table, timestamp):
    if not cfg.run.out:
        return []
    base = _base(cfg.run.out)
    os.makedirs(os.path.dirname(base) or ".", exist_ok=True)
    written = []
    if table is not None:
        with open(base + ".csv", "w") as fh:
            if timestamp:
                fh.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
            fh.write(table)
        written.append(base + ".csv")
    with open(base + ".json", "w") as fh:
        fh.write(summary_document(command, cfg, results, timestamp))
    written.append(base + ".json")
    return written


def _mhz(d: dict) -> dict:
    return {f"{k}_MHz": v / 1e6 for k, v in d.items()}


# commands


def cmd_modes(cfg, scn, out, args):
    table = scn.modes
    geom = crystal_geometry(scn.trap)
    labels = sorted(scn.trap.wavelengths)
    header = ["mode", "nu_MHz", "kind", *(f"eta_{lab}" for lab in labels)]
    rows = [[m.label, f"{m.nu / 1e6:.4f}", m.kind, *(f"{m.lamb_dicke[lab]:.4f}" for lab in labels)] for m in table]
    csv_text = ",".join(header) + "\n" + "".join(",".join(r) + "\n" for r in rows)
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    for r in [header, *rows]:
        print("  ".join(str(x).rjust(w) for x, w in zip(r, widths)), file=out)
    uev = 1e6 / C.E_CHARGE
    print(f"r0 = {geom.r0 * 1e6:.4f} um   dV_y = {geom.barrier_y * uev:.4f} ueV   "
          f"dV_z = {geom.barrier_z * uev:.4f} ueV", file=out)
    if table.flagged:
        print(f"warning: outside Lamb-Dicke regime: {', '.join(table.flagged)}", file=out)
    results = {
        "modes": [{"label": m.label, "nu_MHz": m.nu / 1e6, "kind": m.kind, "lamb_dicke": dict(m.lamb_dicke)}
                  for m in table],
        "r0_um": geom.r0 * 1e6,
        "barrier_y_ueV": geom.barrier_y * uev,
        "barrier_z_ueV": geom.barrier_z * uev,
        "flagged": table.flagged,
    }
    return results, csv_text


def _scan_grid(cfg):
    spec = cfg.scan or ScanSpec.parse(DEFAULT_SCAN)
    return spec, scan_values(spec.start, spec.stop, spec.step) * 1e6


def cmd_spectrum(cfg, scn, out, args):
    spec, grid = _scan_grid(cfg)
    res = excitation_spectrum(scn, grid, spec.axis)
    minima = [float(x) / 1e6 for x in res.minima()]
    print(f"P-population minima at detuning_{spec.axis} (MHz): "
          + ", ".join(f"{x:.3f}" for x in minima), file=out)
    for i, msg in sorted(res.errors.items()):
        print(f"point {i}: {msg}", file=out)
    results = {"scan": str(spec), "minima_MHz": minima, "errors": {str(k): v for k, v in res.errors.items()}}
    return results, res.to_csv()


def cmd_fit(cfg, scn, out, args):
    data = args.data
    x, y = read_spectrum(data)
    guess = {**scn.params, "larmor": scn.zeeman.larmor}
    res = fit_spectrum(x, y, {k: guess[k] for k in FIT_PARAMS}, base=scn)
    for k in FIT_PARAMS:
        print(f"{k:14s} {res.params[k] / 1e6:10.4f} +- {res.half_widths.get(k, float('nan')) / 1e6:.4f} MHz",
              file=out)
    print(f"amplitude {res.amplitude:.6g}  offset {res.offset:.6g}  rss {res.rss:.6g}  "
          f"iterations {res.iterations}", file=out)
    results = {
        "params": _mhz(res.params),
        "half_widths": _mhz(res.half_widths),
        "amplitude": res.amplitude,
        "offset": res.offset,
        "rss": res.rss,
        "iterations": res.iterations,
        "data": os.path.abspath(data),
    }
    return results, None


def cmd_cool(cfg, scn, out, args):
    rep = scn.report(cfg.run.mode)
    d = rep.as_dict()
    if rep.status == NO_COOLING:
        print("no cooling: the lasers do not scatter light", file=out)
    for k, v in d.items():
        print(f"{k:18s} {'' if v is None else v}", file=out)
    if rep.energy is not None:
        print(f"{'E_ex_ueV':18s} {rep.energy / C.E_CHARGE * 1e6}", file=out)
    return {"report": d}, None


def cmd_scan(cfg, scn, out, args):
    spec, grid = _scan_grid(cfg)
    drift = None if cfg.run.robust is None else cfg.run.robust * 1e6
    res = detuning_scan(scn, grid, spec.axis, cfg.run.mode, drift, cfg.run.workers)
    text = res.to_csv()
    out.write(text)
    w = res.column("cooling_rate")
    hot = []
    d = res.detunings / 1e6
    i = 0
    while i < len(w):
        if w[i] < 0:
            j = i
            while j + 1 < len(w) and w[j + 1] < 0:
                j += 1
            hot.append([float(d[i]), float(d[j])])
            i = j + 1
        else:
            i += 1
    errors = {str(k): r.error for k, r in enumerate(res.rows) if r.error}
    return {"scan": str(spec), "mode": res.mode, "heating_windows_MHz": hot, "errors": errors}, text


def cmd_optimize(cfg, scn, out, args):
    run = cfg.run
    objective = "robust_nbar" if run.robust is not None else run.objective
    space = SearchSpace(samples=run.samples, seed=run.seed, mode=run.mode,
                        drift=(run.robust if run.robust is not None else 1.0) * 1e6)
    try:
        res = random_search(scn, space, objective, run.refine, run.workers)
    except NoCoolingRegionError as err:
        if cfg.run.out and err.result is not None:
            _write(cfg, "optimize", {"best_params": None, "heating_samples": err.result.heating_samples},
                   err.result.log_csv(), not args.no_timestamp)
        raise
    print(f"best {objective} = {res.best_objective:.6g} (mode {res.mode}, seed {res.seed}, "
          f"{res.heating_samples}/{len(res.log)} samples discarded)", file=out)
    for k in PARAMS:
        print(f"  {k:14s} {res.best_params[k] / 1e6:10.4f} MHz", file=out)
    results = res.to_dict()
    results["best_params"] = _mhz(res.best_params)
    results["bounds_MHz"] = {k: [lo / 1e6, hi / 1e6] for k, (lo, hi) in space.bounds.items()}
    results["generator"] = "PCG64"
    return results, res.log_csv()


_COMMANDS = {
    "modes": cmd_modes,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "cool": cmd_cool,
    "scan": cmd_scan,
    "optimize": cmd_optimize,
}


def _module_of(err: BaseException) -> str:
    mod = "cli"
    for frame in traceback.extract_tb(err.__traceback__):
        parts = frame.filename.replace(os.sep, "/").split("/")
        if "ioncool" in parts:
            mod = os.path.splitext(parts[-1])[0]
    return mod


def _error_line(err: BaseException) -> str:
    code = getattr(err, "code", None) if isinstance(err, IoncoolError) else None
    if code is None:
        code = "E_IO" if isinstance(err, OSError) else "E_INTERNAL"
    msg = " ".join(str(err).split()) or type(err).__name__
    return f"error code={code} module={_module_of(err)} message={json.dumps(msg)}"


def run(argv=None, stdout=None, stderr=None) -> int:
    out = stdout or sys.stdout
    errout = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        scn = cfg.scenario()
        command = args.command
        results, table = _COMMANDS[command](cfg, scn, out, args)
        for path in _write(cfg, command, results, table, not args.no_timestamp):
            print(f"wrote {path}", file=errout)
        return 0
    except SystemExit as err:  # --help / --version
        return int(err.code or 0)
    except (IoncoolError, OSError, ValueError, KeyError) as err:
        print(_error_line(err), file=errout)
        return EXIT_USAGE if isinstance(err, ConfigError) else EXIT_FAILURE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
