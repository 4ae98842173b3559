"""Command-line interface.

Exit status: 0 ok, 1 domain failure (invalid curve, unsolvable field, ...),
2 usage failure (bad arguments, malformed spec files).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import curves as fc
from . import holonomy as hol
from . import propagators as pr
from . import specs
from .oracle import IntegrationConfig
from .su2 import build_generators, parse_spin

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _clean(value):
    """JSON-ready copy with numpy types converted and non-finite floats dropped to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def _emit_report(report: dict, path) -> None:
    text = json.dumps(_clean(report), indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text, file=sys.stderr)


def _open_out(path):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def _fmt(x: float) -> str:
    return f"{x + 0.0:.17g}"


def _matrix_header(dim: int, first: str = "t") -> list[str]:
    cols = [first]
    for a in range(1, dim + 1):
        for b in range(1, dim + 1):
            cols += [f"re_U{a}_{b}", f"im_U{a}_{b}"]
    return cols


def _matrix_row(t: float, U: np.ndarray) -> list[str]:
    row = [_fmt(t)]
    for z in U.reshape(-1):
        row += [_fmt(z.real), _fmt(z.imag)]
    return row


def _times(args, duration: float) -> np.ndarray:
    if args.t:
        try:
            t = np.array([float(v) for v in args.t.split(",")])
        except ValueError as exc:
            raise UsageError(f"--t expects comma-separated numbers: {exc}") from exc
        if np.any(t < 0) or np.any(t > duration * (1 + 1e-12)):
            raise UsageError(f"times must lie in [0, {duration}]")
        return t
    if args.times < 2:
        raise UsageError("--times must be at least 2")
    return np.linspace(0.0, duration, args.times)


def _spin(text: str):
    try:
        return build_generators(parse_spin(text))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    start = time.perf_counter()
    curve, _, digest = specs.load_curve(args.spec, need_magnitude=False)
    check = fc.validate(curve, theta_margin=args.theta_margin)
    for line in check.violations:
        print(f"violation: {line}")
    print("ok" if check.ok else "invalid")
    _emit_report(dict(command="validate", spec_sha256=digest, method="validate", validation=check.as_dict(),
                      wall_time=time.perf_counter() - start), args.report)
    return EXIT_OK if check.ok else EXIT_DOMAIN


def _residual_probe(rep, curve, prop_fn, times):
    """Schrodinger residual at a few interior times, step 1e-4 T."""
    h = 1e-4 * curve.duration
    probe = np.linspace(0.0, curve.duration, 12)[1:-1]
    probe = probe[(probe > 2 * h) & (probe < curve.duration - 2 * h)]
    return pr.schrodinger_residual(rep, curve, lambda s: prop_fn(s).matrix, probe, h)


def cmd_evolve(args) -> int:
    start = time.perf_counter()
    rep = _spin(args.j)
    curve, _, digest = specs.load_curve(args.spec)
    check = fc.validate(curve)
    if not check.ok:
        for line in check.violations:
            print(f"violation: {line}", file=sys.stderr)
        return EXIT_DOMAIN
    times = _times(args, curve.duration)
    method = args.method.replace("-", "_")
    report = pr.solvability_check(curve)
    prop = pr.evolve(rep, curve, times, method, force=args.force, oracle_steps=args.oracle_steps)
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_matrix_header(rep.dim))
        for t, U in zip(times, prop.matrix):
            writer.writerow(_matrix_row(t, U))
    record = pr.phases(curve, curve.duration)
    out = dict(command="evolve", spec_sha256=digest, j=str(rep.j), method_requested=method,
               method=prop.method, solvability=report.as_dict(), nu0_fit=report.nu0,
               phases_at_T=dict(delta=record.delta, gamma=record.gamma, alpha=record.alpha),
               max_unitarity_defect=prop.meta["unitarity_defect"])
    if prop.method != "oracle":
        def rerun(s):
            return pr.evolve(rep, curve, s, prop.method, force=True)
        out["schrodinger_residual"] = _residual_probe(rep, curve, rerun, times)
    if prop.method == "adiabatic":
        out["adiabaticity"] = pr.adiabaticity(rep, curve)
    if prop.method == "large_omega":
        out["max_abs_nu"] = prop.meta["max_abs_nu"]
    if prop.method == "oracle":
        out["oracle_steps"] = prop.meta["steps"]
    out["wall_time"] = time.perf_counter() - start
    _emit_report(out, args.report)
    return EXIT_OK


def cmd_design(args) -> int:
    start = time.perf_counter()
    spec, digest = specs.read_yaml(args.direction)
    direction = specs.curve_from_spec(spec, Path(args.direction).parent, need_magnitude=False)
    direction = fc.FieldCurve(direction.theta, direction.phi, direction.duration,
                              sample_count=direction.sample_count, kind=direction.kind, params=direction.params)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", fc.FieldDesignWarning)
        curve = fc.design_field(direction, args.nu0)
    specs.dump_yaml(specs.designed_spec(spec, args.nu0), args.out)
    if args.table:
        grid = curve.sample_times()
        r, theta, phi = curve.evaluate(grid)
        with open(args.table, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "r", "theta", "phi"])
            for row in zip(grid, r, theta, phi):
                writer.writerow([_fmt(v) for v in row])
    check = fc.validate(curve)
    _emit_report(dict(command="design", spec_sha256=digest, method="design", nu0=args.nu0,
                      nonpositive_intervals=curve.params.get("nonpositive_intervals", []),
                      notes=[str(w.message) for w in caught], validation=check.as_dict(),
                      solvability=pr.solvability_check(curve).as_dict() if check.ok else None,
                      wall_time=time.perf_counter() - start), args.report)
    return EXIT_OK if check.ok else EXIT_DOMAIN


def cmd_phases(args) -> int:
    start = time.perf_counter()
    rep = _spin(args.j)
    curve, _, digest = specs.load_curve(args.spec)
    times = _times(args, curve.duration)
    record = pr.phases(curve, times)
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "delta", "gamma", "alpha"])
        for row in zip(times, record.delta, record.gamma, record.alpha):
            writer.writerow([_fmt(v) for v in row])
    final = pr.phases(curve, curve.duration)
    levels = final.per_level(rep)
    table = [dict(n=n, delta=d, gamma=g, alpha=a)
             for n, d, g, a in zip(levels["n"], levels["delta"], levels["gamma"], levels["alpha"])]
    if args.levels:
        with open(args.levels, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "delta_n", "gamma_n", "alpha_n"])
            for row in table:
                writer.writerow([_fmt(row[k]) for k in ("n", "delta", "gamma", "alpha")])
    _emit_report(dict(command="phases", spec_sha256=digest, j=str(rep.j), method="phases",
                      phases_at_T=dict(delta=final.delta, gamma=final.gamma, alpha=final.alpha),
                      levels=table, wall_time=time.perf_counter() - start), args.report)
    return EXIT_OK


def cmd_holonomy(args) -> int:
    start = time.perf_counter()
    rep = _spin(args.j)
    pot_spec, pot_digest = specs.read_yaml(args.potential)
    path_spec, path_digest = specs.read_yaml(args.path)
    potential = specs.potential_from_spec(pot_spec)
    path = specs.path_from_spec(path_spec, Path(args.path).parent)
    if args.wilson and not path.closed:
        print("error: Wilson loops need a closed path", file=sys.stderr)
        return EXIT_DOMAIN
    prop = hol.transport(rep, potential, path, engine=args.engine,
                         cfg=IntegrationConfig(steps=args.oracle_steps))
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if args.wilson:
            trace = np.trace(prop.matrix)
            writer.writerow(["re_trace", "im_trace"])
            writer.writerow([_fmt(trace.real), _fmt(trace.imag)])
        else:
            writer.writerow(_matrix_header(rep.dim, "T"))
            writer.writerow(_matrix_row(path.duration, prop.matrix))
    _emit_report(dict(command="holonomy", potential_sha256=pot_digest, path_sha256=path_digest, j=str(rep.j),
                      method=prop.method, pieces=prop.meta["pieces"], closed=path.closed,
                      max_unitarity_defect=prop.meta["unitarity_defect"],
                      wall_time=time.perf_counter() - start), args.report)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dipolekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spin=True, grid=True):
        if spin:
            p.add_argument("--j", required=True, help="spin quantum number, e.g. 1/2 or 1.5")
        if grid:
            p.add_argument("--times", type=int, default=101, help="number of uniform output times on [0, T]")
            p.add_argument("--t", help="explicit comma-separated output times (overrides --times)")
        p.add_argument("--out", help="CSV output file (default: stdout)")
        p.add_argument("--report", help="JSON report file (default: stderr)")

    p = sub.add_parser("validate", help="check a curve spec against the field assumptions")
    p.add_argument("spec")
    p.add_argument("--theta-margin", type=float, default=fc.DEFAULT_THETA_MARGIN)
    p.add_argument("--report")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evolve", help="compute U(t) on a time grid")
    p.add_argument("spec")
    p.add_argument("--method", default="auto",
                   choices=["auto", "adiabatic", "lemma1", "lemma2", "oracle", "large-omega", "large_omega"])
    p.add_argument("--force", action="store_true", help="run exact methods even if the curve fails their condition")
    p.add_argument("--oracle-steps", type=int, default=100_000)
    common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("design", help="attach the solvable magnitude r = r* + nu0 omega to a direction")
    p.add_argument("direction")
    p.add_argument("--nu0", type=float, required=True)
    p.add_argument("--out", required=True, help="curve spec file to write")
    p.add_argument("--table", help="also write the sampled (t, r, theta, phi) table here")
    p.add_argument("--report")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("phases", help="dynamical, geometric and total phases")
    p.add_argument("spec")
    p.add_argument("--levels", help="CSV file for the per-level phase table at T")
    common(p)
    p.set_defaults(func=cmd_phases)

    p = sub.add_parser("holonomy", help="parallel transport / Wilson loop of a gauge potential")
    p.add_argument("potential")
    p.add_argument("path")
    p.add_argument("--wilson", action="store_true", help="print the trace instead of the matrix")
    p.add_argument("--engine", default="auto", choices=["auto", "exact", "oracle"])
    p.add_argument("--oracle-steps", type=int, default=100_000)
    common(p, grid=False)
    p.set_defaults(func=cmd_holonomy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (specs.SpecError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
