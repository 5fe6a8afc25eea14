"""Command-line interface.

Exit codes: 0 success, 2 solver failure, 3 configuration error,
4 a simulated run violated its rate or distortion check.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bitstream import FORMAT_VERSION
from .codec import json_default, simulate_coded, write_reports_csv, write_stream
from .entropy import PRECISION
from .exceptions import ConfigError, NoConvergence, NotStabilizable, ZeroDelayError
from .model import ArCoefficients, augment_ar, load_model, save_model, spectrum, validate_model
from .nrdf import bounds, rate_distortion_sweep, write_sweep_csv

EXIT_SOLVER = 2
EXIT_CONFIG = 3
EXIT_VIOLATION = 4


def parse_grid(text):
    """``a:b:steps`` (inclusive linspace), a comma list, or a single value."""
    try:
        if ":" in text:
            a, b, steps = text.split(":")
            grid = np.linspace(float(a), float(b), int(steps))
        else:
            items = text.split(",") if text.strip() else []
            grid = np.array([float(v) for v in items])
    except ValueError as exc:
        raise ConfigError(f"bad distortion grid {text!r}: {exc}") from None
    if grid.size == 0:
        raise ConfigError("distortion grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ConfigError("distortion grid must be positive and strictly increasing")
    return grid


def _load_state_space(path):
    m = load_model(path)
    if isinstance(m, ArCoefficients):
        m = augment_ar(m)
    return m


def _solver_opts(args):
    return dict(method=args.method, tol=args.tol, max_iter=args.max_iter, damping=args.damping)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_nrdf(args):
    m = _load_state_space(args.model)
    grid = parse_grid(args.d_grid)
    vm = validate_model(m)
    print(f"unstable floor: {vm.spectrum.unstable_log_sum:.9g} bits/sample", file=sys.stderr)
    results = rate_distortion_sweep(vm, grid, n_jobs=args.jobs, **_solver_opts(args))
    rows = []
    for d, sol in results:
        b = bounds(sol, args.gp)
        lattice = "nan" if b.upper_lattice is None else f"{b.upper_lattice:.9g}"
        rows.append([f"{d:.9g}", f"{b.lower:.9g}", f"{b.upper_scalar:.9g}", lattice])
    header = ["D", "lower_bits", "upper_scalar_bits", "upper_lattice_bits"]
    if args.out:
        out = _out_dir(args)
        with open(out / "curve.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        write_sweep_csv(results, out / "sweep.csv", args.gp)
        with open(out / "solutions.json", "w", encoding="utf-8") as fh:
            json.dump([sol.summary() for _, sol in results], fh, indent=2)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return 0


def cmd_simulate(args):
    m = _load_state_space(args.model)
    grid = parse_grid(args.d_grid)
    if args.n < 1000:
        raise ConfigError("--n must be at least 1000")
    vm = validate_model(m)
    results = rate_distortion_sweep(vm, grid, n_jobs=args.jobs, **_solver_opts(args))
    reports = []
    for d, sol in results:
        rep, design, run = simulate_coded(vm, d, args.n, args.seed, sol=sol)
        reports.append(rep)
        if args.out and args.streams:
            write_stream(_out_dir(args) / f"stream_D{d:.9g}.zdrd", design, vm.model, d,
                         run.payloads, run.nbits)
    payload = json.dumps([r.to_dict(lengths=args.lengths) for r in reports], indent=2,
                         default=json_default)
    if args.out:
        out = _out_dir(args)
        (out / "report.json").write_text(payload + "\n", encoding="utf-8")
        write_reports_csv(reports, out / "report.csv")
    else:
        print(payload)
    bad = [r for r in reports if not r.ok]
    for r in bad:
        for v in r.violations:
            print(f"D={r.D:.9g}: {v}", file=sys.stderr)
    return EXIT_VIOLATION if bad else 0


def cmd_augment(args):
    m = load_model(args.model)
    if not isinstance(m, ArCoefficients):
        m = ArCoefficients((m.A,), m.B, m.sigma_x0)
    aug = augment_ar(m)
    if args.out:
        path = Path(args.out)
        if path.suffix != ".json":
            path.mkdir(parents=True, exist_ok=True)
            path = path / "augmented.json"
        save_model(aug, path)
    else:
        print(json.dumps(aug.to_dict(), indent=2))
    return 0


def cmd_validate(args):
    m = _load_state_space(args.model)
    rep = spectrum(m)
    print(json.dumps({"p": m.p, "q": m.q, **rep.to_dict()}, indent=2))
    return 0 if rep.is_stabilizable else EXIT_CONFIG


def build_parser():
    parser = argparse.ArgumentParser(prog="zerodelay",
                                     description="Zero-delay coding of Gauss-Markov sources.")
    parser.add_argument("--version", action="version",
                        version=f"zerodelay {__version__} (bitstream format {FORMAT_VERSION}, "
                                f"coder precision {PRECISION} bits)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=True):
        p.add_argument("--model", required=True, help="model JSON file")
        if grid:
            p.add_argument("--d-grid", required=True, help="a:b:steps, comma list or single D")
            p.add_argument("--tol", type=float, default=1e-10)
            p.add_argument("--max-iter", type=int, default=10_000)
            p.add_argument("--damping", type=float, default=0.5)
            p.add_argument("--method", choices=("barrier", "fixed_point"), default="barrier")
            p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", help="output directory (stdout if omitted)")

    p = sub.add_parser("nrdf", help="rate-distortion curve and bounds")
    common(p)
    p.add_argument("--gp", type=float, default=None, help="lattice normalized second moment")
    p.set_defaults(func=cmd_nrdf)

    p = sub.add_parser("simulate", help="run the coded loop and check it against the bounds")
    common(p)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--streams", action="store_true", help="also write coded bitstreams")
    p.add_argument("--lengths", action="store_true", help="include per-step lengths in JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("augment", help="rewrite an AR(s) model as AR(1)")
    common(p, grid=False)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="spectrum and stabilizability report")
    common(p, grid=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NotStabilizable, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, ZeroDelayError) as exc:
        where = getattr(exc, "distortion", None)
        suffix = f" (D={where:.9g})" if where is not None else ""
        print(f"solver error{suffix}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
