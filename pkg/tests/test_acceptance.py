"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``criterion N: PASS|FAIL ...`` line. Run directly
with ``python tests/test_acceptance.py`` for just those lines.
"""

import sys
import time

import numpy as np
import pytest

from conftest import random_profile
from ppdual.almost_kahler import build_J, build_omega, classify, exterior_derivative_omega, max_nijenhuis
from ppdual.cli import main
from ppdual.geodesics import completeness_probe, geodesic_rhs, random_unit_states
from ppdual.geometry import change_to_frame, geodesic_acceleration, ricci_scalar, riemann
from ppdual.penrose import (convergence_check, fixture_charts, limit_is_plane_wave, scale_metric, take_limit)
from ppdual.ppwave import dual_ricci_closed_form, make_dual, make_frame, make_ppwave, make_torus_chart


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}", flush=True)
        assert ok, detail
    return report


def test_criterion_01_closed_form_ricci(verdict):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for k in range(200):
        dim = (4, 6, 8)[k % 3]
        dual = make_dual(make_ppwave(dim, random_profile(rng, dim, degree=3)))
        p = rng.uniform(-1, 1, dim)
        closed = dual_ricci_closed_form(dual, p)
        generic = change_to_frame(riemann(dual.metric(), p).ricci, make_frame(dual, p))
        worst = max(worst, float(np.max(np.abs(generic - closed)) / (1.0 + np.max(np.abs(closed)))))
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-7 and elapsed <= 30.0,
            f"closed-form frame Ricci: max relative residual {worst:.2e} (<= 1e-7), {elapsed:.1f} s (<= 30 s)")


def test_criterion_02_scalar_law(verdict):
    rng = np.random.default_rng(102)
    cases = [(make_dual(make_ppwave(dim, random_profile(rng, dim))), rng.uniform(-1, 1, (5, dim)))
             for dim in (4, 6, 8) for _ in range(10)]
    # profiles whose transverse gradient vanishes identically; isolated critical
    # points of other profiles are scalar-flat without being flat (see test_geometry)
    cases += [
        (make_dual(make_ppwave(dim, text)), rng.uniform(-1, 1, (5, dim)))
        for dim, text in [(4, "sin(u)"), (4, "1.5"), (6, "exp(u)*u^2"), (8, "0")]
    ]
    worst_law, zero_points, worst_flat = 0.0, 0, 0.0
    for dual, pts in cases:
        t = list(dual.chart.transverse)
        for p in pts:
            curv = riemann(dual.metric(), p)
            grad = dual.chart.profile.jet(p, order=1).grad[t]
            worst_law = max(worst_law, abs(curv.scalar + 0.5 * float(grad @ grad)))
            if abs(curv.scalar) <= 1e-9:
                zero_points += 1
                worst_flat = max(worst_flat, float(np.max(np.abs(curv.riemann))))
    ok = worst_law <= 1e-9 and worst_flat <= 1e-9 and zero_points == 20
    verdict(2, ok, f"scal = -1/2 sum H_i^2: max error {worst_law:.2e} (<= 1e-9); "
                   f"{zero_points} scalar-flat points, max |Rm| there {worst_flat:.2e} (<= 1e-9)")


def test_criterion_03_almost_kahler(verdict):
    rng = np.random.default_rng(103)
    worst_dw = worst_j = worst_c = 0.0
    for k in range(20):
        dim = (4, 6)[k % 2]
        dual = make_dual(make_ppwave(dim, random_profile(rng, dim, degree=3, terms=5)))
        for p in rng.uniform(-1, 1, (100, dim)):
            worst_dw = max(worst_dw, float(np.max(np.abs(exterior_derivative_omega(dual, p)))))
            J = build_J(dual, p).matrix
            g = dual.matrix(p)
            worst_j = max(worst_j, float(np.max(np.abs(J @ J + np.eye(dim)))))
            worst_c = max(worst_c, float(np.max(np.abs(J.T @ g @ J - g))))
    ok = worst_dw <= 1e-10 and worst_j <= 1e-12 and worst_c <= 1e-12
    verdict(3, ok, f"d omega max {worst_dw:.2e} (<= 1e-10), J^2 + I max {worst_j:.2e}, "
                   f"g(J.,J.) - g max {worst_c:.2e} (<= 1e-12) over 20 profiles x 100 points")


def test_criterion_04_kahler_dichotomy(verdict):
    rng = np.random.default_rng(104)
    profiles = ["x3", "sin(u)", "x3^2+x4^2", "sin(u)*x3", "0", "2.5", "-1"]
    mismatches, counts = [], {True: 0, False: 0}
    for text in profiles:
        dual = make_dual(make_ppwave(4, text))
        pts = np.vstack([rng.uniform(-1, 1, (10, 4)), [[0.3, 0.7, 0.0, 0.0]]])
        for p in pts:
            grad = float(np.max(np.abs(dual.chart.profile.jet(p, order=1).grad[2:])))
            a = grad <= 1e-10
            b = max_nijenhuis(dual, p) <= 1e-8
            c = abs(riemann(dual.metric(), p).scalar) <= 1e-10
            counts[a] += 1
            if not a == b == c:
                mismatches.append((text, p.tolist(), a, b, c))
    ok = not mismatches and counts[True] > 0 and counts[False] > 0
    verdict(4, ok, f"grad H ~ 0 <=> Nijenhuis ~ 0 <=> scal ~ 0 at {sum(counts.values())} points "
                   f"({counts[True]} Kahler, {counts[False]} not), {len(mismatches)} mismatches")


@pytest.mark.parametrize("profile", ["x3^2+x4^2", "sin(u)*cos(x3)", "x3^4"])
def test_criterion_05_geodesic_probe(verdict, profile):
    dual = make_dual(make_ppwave(4, profile))
    start = time.perf_counter()
    rep = completeness_probe(dual, ensemble=100, horizon=1e3, seed=105, rtol=1e-10, atol=1e-10,
                             raise_on_violation=False)
    elapsed = time.perf_counter() - start
    drift = max(rep.max_drift_c, rep.max_drift_c2, rep.max_drift_speed)
    ok = drift <= 1e-6 and rep.bounds_hold and rep.max_growth_excess <= 1e-4 and elapsed <= 120.0
    verdict(5, ok, f"[{profile}] 100 geodesics to t = 1000: max drift {drift:.2e} (<= 1e-6), "
                   f"growth excess {rep.max_growth_excess:.2e} (<= 1e-4), u excess {rep.max_u_excess:.2e}, "
                   f"{elapsed:.1f} s (<= 120 s)")


def test_criterion_06_reduced_system(verdict):
    rng = np.random.default_rng(106)
    worst = 0.0
    for k in range(1000):
        dim = (4, 6, 8)[k % 3]
        dual = make_dual(make_ppwave(dim, random_profile(rng, dim, degree=3, terms=4)))
        y = np.concatenate([rng.uniform(-1, 1, dim), rng.normal(size=dim)])
        acc = geodesic_rhs(dual, y)[dim:]
        ref = geodesic_acceleration(dual.metric(), y[:dim], y[dim:])
        worst = max(worst, float(np.max(np.abs(acc - ref))))
    verdict(6, worst <= 1e-9, f"reduced system vs -Gamma xdot xdot at 1000 states: max {worst:.2e} (<= 1e-9)")


def test_criterion_07_penrose(verdict):
    rng = np.random.default_rng(107)
    charts = fixture_charts()
    pts = rng.uniform(-0.5, 0.5, (20, 4))
    homothety = max(scale_metric(c, w).homothety_residual(p)
                    for c in charts.values() for w in (1.0, 0.5, 0.1, 0.01) for p in pts)
    conv = {name: convergence_check(c, (1e-1, 1e-2, 1e-3)) for name, c in charts.items()}
    certs = {name: limit_is_plane_wave(take_limit(c)) for name, c in charts.items()}
    ok = (homothety <= 1e-10 and all(c["order_ok"] and c["monotone"] for c in conv.values())
          and all(c.ok for c in certs.values()))
    worst_par = max(c.parallel for c in certs.values())
    worst_curv = max(c.curvature for c in certs.values())
    ratios = {name: [round(r, 3) for r in c["ratios"]] for name, c in conv.items()}
    verdict(7, ok, f"5 charts: homothety residual {homothety:.2e} (<= 1e-10), deviation ratios {ratios}, "
                   f"|nabla V| {worst_par:.1e}, |R(X,Y)| on V-perp {worst_curv:.1e} (<= 1e-9)")


def test_criterion_08_ppwave_ricci(verdict):
    rng = np.random.default_rng(108)
    worst = 0.0
    for k in range(50):
        dim = (4, 5, 6)[k % 3]
        chart = make_ppwave(dim, random_profile(rng, dim))
        p = rng.uniform(-1, 1, dim)
        ric, _ = ricci_scalar(chart.metric(), p)
        expected = np.zeros((dim, dim))
        expected[1, 1] = -0.5 * np.trace(chart.profile.jet(p).hess[2:, 2:])
        worst = max(worst, float(np.max(np.abs(ric - expected))))
    harmonic = make_ppwave(4, "x3^2 - x4^2")
    flat = max(float(np.max(np.abs(ricci_scalar(harmonic.metric(), p)[0]))) for p in rng.uniform(-2, 2, (20, 4)))
    nonharmonic = make_ppwave(4, "x3^2 + x4^2")
    curved = abs(ricci_scalar(nonharmonic.metric(), np.zeros(4))[0][1, 1])
    ok = worst <= 1e-9 and flat <= 1e-9 and curved > 1.0
    verdict(8, ok, f"pp-wave Ricci = -1/2 lap H du du on 50 profiles: max error {worst:.2e} (<= 1e-9); "
                   f"harmonic x3^2 - x4^2 max |Ric| {flat:.1e}")


def test_criterion_09_torus(verdict):
    rng = np.random.default_rng(109)
    pts = rng.uniform(0, 2 * np.pi, (100, 4))
    sin_rep = classify(make_dual(make_torus_chart(1, "sin(x1)")), pts)
    cos_rep = classify(make_dual(make_torus_chart(1, "cos(theta)")), pts)
    ok = (sin_rep["max_domega"] <= 1e-10 and sin_rep["verdict"] == "strictly_almost_kahler"
          and cos_rep["verdict"] == "kahler_flat")
    verdict(9, ok, f"torus: sin(x1) d omega {sin_rep['max_domega']:.2e} (<= 1e-10) -> {sin_rep['verdict']}; "
                   f"cos(theta) -> {cos_rep['verdict']}")


def test_criterion_10_determinism(verdict, tmp_path):
    commands = [
        ["curvature", "--profile", "x3^2+x4^2"],
        ["verify-ak", "--profile", "sin(u)*x3"],
        ["geodesics", "--profile", "sin(u)*cos(x3)", "--samples", "5", "--horizon", "50"],
        ["penrose", "--fixture", "mixed"],
        ["torus-verify", "--profile", "sin(x1)", "--samples", "20"],
    ]
    same = []
    for k, argv in enumerate(commands):
        outputs = []
        for run in range(2):
            path = tmp_path / f"{k}-{run}.json"
            main(argv + ["--seed", "110", "--no-timestamp", "--out", str(path)])
            outputs.append(path.read_bytes())
        same.append(outputs[0] == outputs[1])
    verdict(10, all(same), f"byte-identical reports for {sum(same)}/{len(same)} commands")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
