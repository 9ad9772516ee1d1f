"""Command line front end.

Every command writes one JSON report (to ``--out`` or stdout). Reports carry
``"schema": 1`` and are serialised with sorted keys, so two runs with the same
arguments and seed are byte-identical once ``--no-timestamp`` drops the only
varying field.

Exit codes: 0 success, 2 bad input (parse errors, invalid charts), 3 numeric
failure (domain errors, step underflow, or a verified identity out of tolerance).
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import penrose as pen
from .almost_kahler import KAHLER_TOL, build_J, classify, exterior_derivative_omega
from .geodesics import GrowthBoundViolation, completeness_probe, integrate, random_unit_states
from .geometry import SingularMetricError, change_to_frame, riemann
from .jet import DomainError
from .ode import StepUnderflowError
from .ppwave import (ChartError, chart_for, dual_ricci_closed_form, dual_scalar_closed_form, load_chart,
                     make_dual, make_frame)
from .scalar_field import ParseError

SCHEMA = 1
DOMEGA_TOL = 1e-10
DRIFT_TOL = 1e-6
RICCI_TOL = 1e-7  # relative
SCALAR_TOL = 1e-9
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class NumericFailure(Exception):
    """A report was produced but a checked identity failed."""

    def __init__(self, report: dict, reason: str):
        super().__init__(reason)
        self.report = report


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _chart(args, kind: str = "ppwave"):
    if args.chart:
        return load_chart(args.chart)
    if args.profile is None:
        raise ChartError("give --profile or --chart")
    return chart_for(args.dim, args.profile, kind)


def _points(args, dim: int) -> np.ndarray:
    rng = np.random.default_rng(args.seed)
    pts = rng.uniform(-1.0, 1.0, (args.samples, dim))
    if args.point:
        p = np.array(_floats(args.point))
        if p.shape != (dim,):
            raise ChartError(f"--point needs {dim} coordinates, got {p.size}")
        pts = np.vstack([p, pts])
    return pts


def _max_domega(dual, points) -> float:
    return max(float(np.max(np.abs(exterior_derivative_omega(dual, p)))) for p in points)


def _config(args) -> dict:
    skip = {"func", "out", "csv", "no_timestamp"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# commands -----------------------------------------------------------------

def cmd_curvature(args) -> dict:
    chart = _chart(args)
    dual = make_dual(chart)
    metric = dual.metric()
    rows, worst_ricci, worst_scalar, worst_riemann = [], 0.0, 0.0, 0.0
    for p in _points(args, chart.dim):
        curv = riemann(metric, p)
        frame = make_frame(dual, p)
        generic = change_to_frame(curv.ricci, frame)
        closed = dual_ricci_closed_form(dual, p)
        res = float(np.max(np.abs(generic - closed)) / (1.0 + np.max(np.abs(closed))))
        scal = dual_scalar_closed_form(dual, p)
        worst_ricci = max(worst_ricci, res)
        worst_scalar = max(worst_scalar, abs(curv.scalar - scal))
        worst_riemann = max(worst_riemann, float(np.max(np.abs(curv.riemann))))
        rows.append({
            "point": p.tolist(),
            "scalar": curv.scalar,
            "scalar_closed_form": scal,
            "ricci_residual": res,
            "frame_ricci": generic.tolist(),
        })
    flat = worst_riemann <= SCALAR_TOL and all(abs(r["scalar"]) <= SCALAR_TOL for r in rows)
    report = {
        "chart": {"dimension": chart.dim, "kind": chart.kind, "profile": chart.profile.text},
        "frame": list(make_frame(dual, np.zeros(chart.dim)).labels),
        "samples": rows,
        "max_ricci_residual": worst_ricci,
        "max_scalar_residual": worst_scalar,
        "verdict": "flat" if flat else "curved",
    }
    if worst_ricci > RICCI_TOL or worst_scalar > SCALAR_TOL:
        raise NumericFailure(report, "closed-form curvature mismatch")
    return report


def _ak_report(chart, points) -> dict:
    dual = make_dual(chart)
    report = classify(dual, points)
    worst_j = worst_compat = 0.0
    for p in points:
        J = build_J(dual, p)
        g = dual.matrix(p)
        n = chart.dim
        worst_j = max(worst_j, float(np.max(np.abs(J.matrix @ J.matrix + np.eye(n)))))
        worst_compat = max(worst_compat, float(np.max(np.abs(J.matrix.T @ g @ J.matrix - g))))
    report["max_J_squared_residual"] = worst_j
    report["max_compatibility_residual"] = worst_compat
    report["max_domega"] = _max_domega(dual, points)
    report["chart"] = {"dimension": chart.dim, "kind": chart.kind, "profile": chart.profile.text}
    return report


def cmd_verify_ak(args) -> dict:
    chart = _chart(args)
    report = _ak_report(chart, _points(args, chart.dim))
    if report["max_domega"] > DOMEGA_TOL:
        raise NumericFailure(report, f"d omega residual {report['max_domega']:.3e} exceeds {DOMEGA_TOL}")
    return report


def cmd_torus_verify(args) -> dict:
    if args.chart:
        chart = load_chart(args.chart)
        if chart.kind != "torus":
            raise ChartError("torus-verify needs a torus chart")
    else:
        chart = _chart(args, "torus")
    rng = np.random.default_rng(args.seed)
    points = rng.uniform(0.0, 2.0 * np.pi, (args.samples, chart.dim))
    report = _ak_report(chart, points)
    report["kahler_iff_constant"] = (report["verdict"] == "kahler_flat") == (report["max_grad_H"] <= KAHLER_TOL)
    if report["max_domega"] > DOMEGA_TOL:
        raise NumericFailure(report, f"d omega residual {report['max_domega']:.3e} exceeds {DOMEGA_TOL}")
    return report


def cmd_geodesics(args) -> dict:
    chart = _chart(args)
    dual = make_dual(chart)
    probe = completeness_probe(dual, ensemble=args.samples, horizon=args.horizon, seed=args.seed,
                               rtol=args.tol_rel, atol=args.tol_abs, jobs=args.jobs,
                               raise_on_violation=False, engine=args.engine)
    report = {"chart": {"dimension": chart.dim, "kind": chart.kind, "profile": chart.profile.text}}
    report.update(probe.as_dict())
    if args.csv:
        rng = np.random.default_rng(args.seed)
        traj = integrate(dual, random_unit_states(dual, 1, rng)[0], args.horizon, args.tol_rel, args.tol_abs)
        traj.write_csv(args.csv)
        report["csv_rows"] = len(traj.t)
    drift = max(probe.max_drift_c, probe.max_drift_c2, probe.max_drift_speed)
    if not probe.bounds_hold:
        raise NumericFailure(report, "; ".join(probe.violations))
    if drift > DRIFT_TOL:
        raise NumericFailure(report, f"drift {drift:.3e} exceeds {DRIFT_TOL}")
    return report


def cmd_penrose(args) -> dict:
    if args.chart:
        chart = pen.load_chart(args.chart)
    else:
        fixtures = pen.fixture_charts()
        if args.fixture not in fixtures:
            raise pen.LightlikeChartError(f"unknown fixture {args.fixture!r}; choose from {sorted(fixtures)}")
        chart = fixtures[args.fixture]
    omegas = _floats(args.omegas)
    sweep = _floats(args.sweep)
    report = pen.penrose_report(chart, omegas, sweep, args.samples, args.seed, args.profile or "0")
    cert = report["plane_wave"]
    if report["max_homothety_residual"] > pen.HOMOTHETY_TOL or not cert["ok"]:
        raise NumericFailure(report, "homothety or plane wave certificate failed")
    if not report["convergence"]["order_ok"]:
        raise NumericFailure(report, "limit deviation does not decay like O(omega)")
    return report


COMMANDS = {
    "curvature": cmd_curvature,
    "verify-ak": cmd_verify_ak,
    "geodesics": cmd_geodesics,
    "penrose": cmd_penrose,
    "torus-verify": cmd_torus_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppdual", description="Riemannian duals of pp-wave metrics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = {"curvature": 20, "verify-ak": 20, "geodesics": 20, "penrose": 20, "torus-verify": 100}
    for name, func in COMMANDS.items():
        p = sub.add_parser(name)
        # penrose takes a lightlike chart file plus an optional profile for the dual
        src = p if name == "penrose" else p.add_mutually_exclusive_group()
        src.add_argument("--profile", help="wave profile H as an expression")
        src.add_argument("--chart", help="chart file (JSON)")
        p.add_argument("--dim", type=int, default=4, help="chart dimension (default 4)")
        p.add_argument("--samples", type=int, default=defaults[name])
        p.add_argument("--horizon", type=float, default=100.0)
        p.add_argument("--tol-abs", type=float, default=1e-10)
        p.add_argument("--tol-rel", type=float, default=1e-10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--no-timestamp", action="store_true")
        p.add_argument("--point", help="extra sample point, comma separated")
        if name == "geodesics":
            p.add_argument("--csv", help="write one trajectory as CSV")
            p.add_argument("--engine", choices=("compiled", "numpy"), default="compiled",
                           help="integrator backend for the ensemble")
        if name == "penrose":
            p.add_argument("--fixture", default="minkowski", help="built-in lightlike chart")
            p.add_argument("--omegas", default="1,0.5,0.1,0.01", help="homothety check values")
            p.add_argument("--sweep", default="0.1,0.01,0.001", help="convergence sweep values")
        p.set_defaults(func=func)
    return parser


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    header = {"schema": SCHEMA, "command": args.command, "config": _config(args)}
    if not args.no_timestamp:
        header["timestamp"] = datetime.now(timezone.utc).isoformat()
    try:
        body = args.func(args)
        code = EXIT_OK
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ChartError, pen.LightlikeChartError, ValueError, OSError) as exc:
        # domain errors are ValueErrors as well, so check them first
        if isinstance(exc, DomainError):
            print(f"numeric error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularMetricError, StepUnderflowError, GrowthBoundViolation, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        body, code = exc.report, EXIT_NUMERIC
    _emit({**header, **body, "status": "ok" if code == EXIT_OK else "failed"}, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
