import json
import subprocess
import sys

import numpy as np
import pytest

from ppdual.cli import main
from ppdual.penrose import fixture_charts, save_chart as save_lightlike
from ppdual.ppwave import make_ppwave, make_torus_chart, save_chart


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out else None
    return code, report, out.err


def test_curvature_linear_profile(capsys):
    code, rep, _ = run(capsys, "curvature", "--profile", "x3", "--no-timestamp")
    assert code == 0 and rep["status"] == "ok" and rep["schema"] == 1
    assert all(s["scalar"] == pytest.approx(-0.5, abs=1e-12) for s in rep["samples"])
    assert rep["verdict"] == "curved"


def test_curvature_zero_profile_flat(capsys):
    code, rep, _ = run(capsys, "curvature", "--profile", "0")
    assert code == 0 and rep["verdict"] == "flat" and "timestamp" in rep


def test_curvature_at_point(capsys):
    code, rep, _ = run(capsys, "curvature", "--profile", "x3^2+x4^2", "--point", "0,0,1,0", "--samples", "2")
    assert code == 0
    first = rep["samples"][0]
    assert first["point"] == [0, 0, 1, 0]
    ric = np.array(first["frame_ricci"])
    np.testing.assert_allclose(np.diag(ric), [2, -2, 0, -2], atol=1e-12)
    assert ric[0, 3] == pytest.approx(-2, abs=1e-12)
    assert len(rep["samples"]) == 3


def test_curvature_higher_dimension(capsys):
    code, rep, _ = run(capsys, "curvature", "--profile", "x5*x6^2 - u*x3", "--dim", "6", "--samples", "3")
    assert code == 0 and rep["frame"] == ["T", "X3", "X4", "X5", "X6", "Z"]
    assert rep["max_ricci_residual"] <= 1e-7


@pytest.mark.parametrize("profile, verdict", [
    ("sin(u)*x3", "strictly_almost_kahler"),
    ("sin(u)", "kahler_flat"),
    ("0", "kahler_flat"),
])
def test_verify_ak(capsys, profile, verdict):
    code, rep, _ = run(capsys, "verify-ak", "--profile", profile)
    assert code == 0
    assert rep["verdict"] == verdict and rep["max_domega"] <= 1e-10
    assert rep["max_J_squared_residual"] <= 1e-12


def test_verify_ak_odd_dimension(capsys):
    code, rep, err = run(capsys, "verify-ak", "--profile", "x3", "--dim", "5")
    assert code == 2 and rep is None and "even dimension" in err


def test_geodesics_zero_profile(capsys, tmp_path):
    csv_path = tmp_path / "traj.csv"
    code, rep, _ = run(capsys, "geodesics", "--profile", "0", "--samples", "4", "--csv", str(csv_path))
    assert code == 0
    assert rep["max_drift_c"] == 0.0 and rep["max_drift_c2"] == 0.0
    assert rep["bounds_hold"]
    header = csv_path.read_text().splitlines()[0]
    assert header == "t,v,u,x3,x4,c,c2,speed"
    assert rep["csv_rows"] == len(csv_path.read_text().splitlines()) - 1


def test_geodesics_long_horizon(capsys):
    code, rep, _ = run(capsys, "geodesics", "--profile", "x3^2+x4^2", "--horizon", "1000", "--samples", "20")
    assert code == 0
    assert max(rep["max_drift_c"], rep["max_drift_c2"], rep["max_drift_speed"]) <= 1e-6


def test_geodesics_numpy_engine(capsys):
    code, rep, _ = run(capsys, "geodesics", "--profile", "x3", "--horizon", "10", "--samples", "3",
                       "--engine", "numpy")
    assert code == 0 and rep["config"]["engine"] == "numpy"


def test_geodesics_loose_tolerance_fails_check(capsys):
    code, rep, err = run(capsys, "geodesics", "--profile", "x3^3", "--horizon", "50", "--samples", "3",
                         "--tol-rel", "1e-3", "--tol-abs", "1e-3", "--engine", "numpy")
    assert code == 3
    assert rep["status"] == "failed" and "drift" in err


def test_malformed_profile_exit_2(capsys):
    code, rep, err = run(capsys, "geodesics", "--profile", "x3^^2")
    assert code == 2 and rep is None
    assert "offset 3" in err


def test_undeclared_name_exit_2(capsys):
    code, _, err = run(capsys, "curvature", "--profile", "x7")
    assert code == 2 and "x7" in err


def test_profile_depending_on_v_exit_2(capsys):
    assert run(capsys, "curvature", "--profile", "v*x3")[0] == 2


def test_missing_source_exit_2(capsys):
    assert run(capsys, "curvature")[0] == 2


def test_domain_error_exit_3(capsys):
    code, _, err = run(capsys, "curvature", "--profile", "1/x3", "--point", "0,0,0,0")
    assert code == 3 and "division" in err


def test_bad_point_exit_2(capsys):
    assert run(capsys, "curvature", "--profile", "x3", "--point", "1,2")[0] == 2


def test_chart_files(capsys, tmp_path):
    path = tmp_path / "chart.json"
    save_chart(make_ppwave(6, "sin(u)*x3*x6"), path)
    code, rep, _ = run(capsys, "verify-ak", "--chart", str(path), "--samples", "5")
    assert code == 0 and rep["chart"]["dimension"] == 6
    assert run(capsys, "verify-ak", "--chart", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 4, "kind": "ppwave", "profile": "x3 +"}')
    assert run(capsys, "curvature", "--chart", str(bad))[0] == 2


def test_profile_and_chart_are_exclusive(capsys, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["curvature", "--profile", "x3", "--chart", "c.json"])
    assert info.value.code == 2


def test_torus_verify(capsys):
    code, rep, _ = run(capsys, "torus-verify", "--profile", "sin(x1)")
    assert code == 0 and rep["verdict"] == "strictly_almost_kahler" and rep["samples"] == 100
    assert rep["max_domega"] <= 1e-10 and rep["kahler_iff_constant"]
    code, rep, _ = run(capsys, "torus-verify", "--profile", "cos(theta)")
    assert code == 0 and rep["verdict"] == "kahler_flat"


def test_torus_verify_chart_and_errors(capsys, tmp_path):
    path = tmp_path / "torus.json"
    save_chart(make_torus_chart(2, "sin(x1 - x4)"), path)
    code, rep, _ = run(capsys, "torus-verify", "--chart", str(path), "--samples", "10")
    assert code == 0 and rep["chart"]["dimension"] == 6
    assert run(capsys, "torus-verify", "--profile", "x1")[0] == 2
    flat = tmp_path / "pp.json"
    save_chart(make_ppwave(4, "x3"), flat)
    assert run(capsys, "torus-verify", "--chart", str(flat))[0] == 2


def test_penrose_minkowski(capsys):
    code, rep, _ = run(capsys, "penrose")
    assert code == 0
    assert rep["max_homothety_residual"] <= 1e-10 and rep["plane_wave"]["ok"]
    assert rep["plane_wave"]["curvature"] == 0.0
    assert rep["dual"]["classification"]["verdict"] == "kahler_flat"


def test_penrose_chart_file(capsys, tmp_path):
    path = tmp_path / "exp.json"
    save_lightlike(fixture_charts()["exp_front"], path)
    code, rep, _ = run(capsys, "penrose", "--chart", str(path))
    assert code == 0 and rep["limit"]["h22"] == "exp(x0)"
    assert rep["dual"]["status"] == "limit computed; Brinkmann conversion unsupported"


def test_penrose_sweep_is_monotone(capsys):
    code, rep, _ = run(capsys, "penrose", "--fixture", "mixed", "--sweep", "0.1,0.01,0.001")
    assert code == 0
    devs = rep["convergence"]["deviations"]
    assert devs == sorted(devs, reverse=True) and rep["convergence"]["order_ok"]


def test_penrose_with_profile(capsys):
    code, rep, _ = run(capsys, "penrose", "--profile", "x3*x4")
    assert code == 0 and rep["dual"]["classification"]["verdict"] == "strictly_almost_kahler"


def test_penrose_unknown_fixture(capsys):
    assert run(capsys, "penrose", "--fixture", "kerr")[0] == 2


@pytest.mark.parametrize("argv", [
    ["curvature", "--profile", "x3^2*u - x4", "--samples", "5"],
    ["verify-ak", "--profile", "sin(u)*x3", "--samples", "5"],
    ["geodesics", "--profile", "x3^2+x4^2", "--samples", "3", "--horizon", "20"],
    ["penrose", "--fixture", "schwarzschild", "--samples", "5"],
    ["torus-verify", "--profile", "sin(x1)", "--samples", "5"],
])
def test_deterministic_reports(argv, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["--seed", "7", "--no-timestamp", "--out", str(a)]) == 0
    assert main(argv + ["--seed", "7", "--no-timestamp", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(argv + ["--seed", "8", "--no-timestamp", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "ppdual", "verify-ak", "--profile", "x3", "--samples", "2",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["verdict"] == "strictly_almost_kahler"
    proc = subprocess.run([sys.executable, "-m", "ppdual", "curvature", "--profile", "(x3"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "offset" in proc.stderr
