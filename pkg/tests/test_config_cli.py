import csv
import json
import math

import numpy as np
import pytest

from nonholo import cli
from nonholo import config as cfgmod
from nonholo import dynamics as dyn
from nonholo.constraint_geometry import ConstrainedChartPoint
from nonholo.errors import ConfigError, ParseError


def run_cli(capsys, *argv):
    code = cli.run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- config parsing ----------------------------------------------------------------

def test_load_bundled_particle_matches_builtin(particle, rng):
    bundle = cfgmod.load_system("particle.cfg")
    assert bundle.system.coordinates == ("x", "y", "z")
    assert bundle.system.k == 1
    assert bundle.simulation == {"t_final": 1.0, "dt": 0.001,
                                 "method": "rk4"}
    for _ in range(20):
        point = ConstrainedChartPoint(rng.uniform(-2, 2, 3),
                                      rng.uniform(-2, 2, 2))
        a = dyn.nonholonomic_field(bundle.system, point).ambient
        b = dyn.nonholonomic_field(particle.system, point).ambient
        assert np.allclose(a, b, atol=1e-12)


def test_load_bundled_disk_matches_builtin(disk, rng):
    bundle = cfgmod.load_system("disk.cfg")
    assert bundle.system.n == 4 and bundle.system.k == 2
    assert set(bundle.charts) == {"disk-R2", "disk-SE2"}
    assert set(bundle.actions) == {"translate-xy", "se2"}
    for _ in range(20):
        point = ConstrainedChartPoint(rng.uniform(-2, 2, 4),
                                      rng.uniform(-2, 2, 2))
        a = dyn.nonholonomic_field(bundle.system, point).ambient
        b = dyn.nonholonomic_field(disk.system, point).ambient
        assert np.allclose(a, b, atol=1e-12)


def test_config_chart_reduces_like_builtin(rng):
    from nonholo import reduction as red
    bundle = cfgmod.load_system("disk.cfg")
    chart = red.reduce(bundle.system, bundle.charts["disk-SE2"])
    for _ in range(10):
        point = ConstrainedChartPoint(rng.uniform(-2, 2, 4),
                                      rng.uniform(-2, 2, 2))
        assert red.pi_relatedness_residual(bundle.system, chart, point) \
            <= 1e-10


def test_config_rejects_square_constraint_count(tmp_path):
    text = """
[system]
coordinates = x, y

[metric]
1, 0
0, 1

[constraints]
1, 0
0, 1
"""
    with pytest.raises(ConfigError):
        cfgmod.build_system(cfgmod.parse_config(text))


def test_config_rejects_asymmetric_metric():
    text = """
[system]
coordinates = x, y

[metric]
1, x
0, 1
"""
    with pytest.raises(ConfigError):
        cfgmod.parse_config(text)


def test_config_rejects_non_spd_metric():
    text = """
[system]
coordinates = x, y

[metric]
1, 2
2, 1
"""
    with pytest.raises(ConfigError):
        cfgmod.build_system(cfgmod.parse_config(text))


def test_config_rejects_rank_deficient_constraints():
    text = """
[system]
coordinates = x, y, z

[metric]
1, 0, 0
0, 1, 0
0, 0, 1

[constraints]
0, 0, 0
"""
    with pytest.raises(ConfigError):
        cfgmod.build_system(cfgmod.parse_config(text))


def test_config_parse_error_carries_position():
    text = """
[system]
coordinates = x, y

[metric]
1, 0
0, 1 +
"""
    with pytest.raises(ParseError):
        cfgmod.parse_config(text)


def test_config_missing_file():
    with pytest.raises(ConfigError):
        cfgmod.load_system("nope.cfg")


# -- CLI ---------------------------------------------------------------------------

def test_cli_examples(capsys):
    code, out, _ = run_cli(capsys, "examples")
    assert code == 0
    assert json.loads(out)["bundled_configs"] == ["disk.cfg", "particle.cfg"]


def test_cli_field_particle(capsys):
    code, out, _ = run_cli(capsys, "field", "particle.cfg",
                           "--q", "0,1,0", "--u", "2,3")
    assert code == 0
    report = json.loads(out)
    assert np.allclose(report["ambient"]["q_dot"], [2.0, 3.0, 2.0])
    # multiplier solution: momenta rates (-3, 0, 3), not the simplified
    # (0, 0, 6) sometimes quoted for this example
    assert np.allclose(report["ambient"]["p_dot"], [-3.0, 0.0, 3.0])
    assert report["energy"] == pytest.approx(8.5)


def test_cli_simulate_writes_csv_and_diagnostics(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    out_diag = tmp_path / "diag.json"
    code, out, _ = run_cli(capsys, "simulate", "particle.cfg",
                           "--q", "0,0,0", "--u", "2,3",
                           "--t", "1", "--dt", "0.001",
                           "--action", "translate-xz",
                           "--out", str(out_csv), "--diag", str(out_diag))
    assert code == 0
    diag = json.loads(out_diag.read_text())
    assert diag["energy_drift"] < 1e-10
    assert diag["constraint_residual_max"] < 1e-12
    assert diag["steps"] == 1000

    with open(out_csv) as fh:
        rows = list(csv.reader(fh))
    header, first, last = rows[0], rows[1], rows[-1]
    assert header == ["t", "q1", "q2", "q3", "u1", "u2", "p1", "p2", "p3",
                      "H", "constraint_residual", "J1", "J2"]
    assert len(rows) == 1002
    # 17 significant digits in the payload
    assert any("e" in cell and len(cell.split("e")[0].replace("-", "")
                                   .replace(".", "")) == 17
               for cell in first)
    final = dict(zip(header, map(float, last)))
    assert final["t"] == pytest.approx(1.0)
    assert final["q1"] == pytest.approx((2 / 3) * math.asinh(3.0), abs=1e-6)
    assert final["q2"] == pytest.approx(3.0, abs=1e-9)
    assert final["q3"] == pytest.approx((2 / 3) * (math.sqrt(10) - 1),
                                        abs=1e-6)
    assert final["J1"] == pytest.approx(2 / math.sqrt(10), abs=1e-6)
    assert final["J2"] == pytest.approx(6 / math.sqrt(10), abs=1e-6)


def test_cli_check_hj_passing_section(capsys):
    gamma = "2/sqrt(1 + y^2),3,2*y/sqrt(1 + y^2)"
    code, out, _ = run_cli(capsys, "check-hj", "particle.cfg",
                           "--gamma", gamma, "--points", "25")
    assert code == 0
    report = json.loads(out)
    assert report["overall"] == "PASS"
    by_name = {c["check"]: c for c in report["checks"]}
    assert by_name["closedness"]["max_residual"] <= 1e-10
    assert by_name["membership"]["max_residual"] <= 1e-12
    assert by_name["type1"]["max_residual"] <= 1e-8
    assert by_name["lemma_i"]["pass"] and by_name["lemma_ii"]["pass"]
    # a generic moving section is not a rest solution
    assert not by_name["classical"]["pass"]


def test_cli_check_hj_flags_non_closed_section(capsys):
    code, out, _ = run_cli(capsys, "check-hj", "particle.cfg",
                           "--gamma", "2,3,2*y", "--points", "25")
    assert code == 0
    report = json.loads(out)
    assert report["overall"] == "FAIL"
    by_name = {c["check"]: c for c in report["checks"]}
    assert not by_name["closedness"]["pass"]
    assert by_name["membership"]["pass"]


def test_cli_check_hj_with_phase_map(capsys):
    gamma = "2/sqrt(1 + y^2),3,2*y/sqrt(1 + y^2)"
    eps = "x,y,z,p1,p2,p3"
    code, out, _ = run_cli(capsys, "check-hj", "particle.cfg",
                           "--gamma", gamma, "--eps", eps,
                           "--points", "10")
    assert code == 0
    report = json.loads(out)
    by_name = {c["check"]: c for c in report["checks"]}
    assert by_name["symplecticity"]["pass"]
    assert by_name["type2"]["pass"]
    assert by_name["type2_equivalence"]["pass"]


def test_cli_reduce_reports_conflicts(capsys):
    code, out, _ = run_cli(capsys, "reduce", "particle.cfg",
                           "--chart", "particle-R2", "--points", "20")
    assert code == 0
    report = json.loads(out)
    assert report["pi_relatedness_max"] <= 1e-10
    comparison = report["reference_comparison"]
    assert set(comparison["conflicts"]) == {"dy/dt", "dpx/dt", "dpy/dt"}
    assert "authoritative" in comparison["note"]


def test_cli_reduce_disk_matches_reference(capsys):
    code, out, _ = run_cli(capsys, "reduce", "disk.cfg",
                           "--chart", "disk-R2", "--points", "20")
    assert code == 0
    report = json.loads(out)
    assert report["pi_relatedness_max"] <= 1e-10
    assert report["reference_comparison"]["conflicts"] == []
    assert report["reference_comparison"]["max_gap"] <= 1e-9


def test_cli_analyze(capsys):
    code, out, _ = run_cli(capsys, "analyze", "particle.cfg",
                           "--q", "0,0.5,0", "--depth", "2")
    assert code == 0
    report = json.loads(out)
    assert report["bracket_generating"]["generating"] is True
    assert report["bracket_generating"]["rank"] == 3
    assert report["d_regular"] and report["admissible"] \
        and report["compatible"]


def test_cli_usage_error_is_exit_1(capsys):
    code, _, err = run_cli(capsys, "field", "particle.cfg", "--q", "0,0,0")
    assert code == 1
    assert json.loads(err)["error"] == "usage"
    code, _, _ = run_cli(capsys, "field", "particle.cfg",
                         "--q", "0,0", "--u", "1,1")
    assert code == 1


def test_cli_config_error_is_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("""
[system]
coordinates = x, y

[metric]
1, 0
0, 1 +
""")
    code, _, err = run_cli(capsys, "field", str(bad), "--q", "0,0",
                           "--u", "1,1")
    assert code == 2
    payload = json.loads(err)
    assert payload["error"] == "config"
    assert "offset" in payload["message"] or "position" in payload


def test_cli_numerical_error_is_exit_3(tmp_path, capsys):
    # frozen elimination pattern dies at x = pi/2
    cfg = tmp_path / "fragile.cfg"
    cfg.write_text("""
[system]
coordinates = x, y

[metric]
1, 0
0, 1

[constraints]
cos(x), 0.0001
""")
    code, _, err = run_cli(capsys, "field", str(cfg),
                           "--q", "1.5707963267948966,0", "--u", "1")
    assert code == 3
    assert json.loads(err)["error"] == "numerical"


def test_cli_unknown_chart_is_exit_2(capsys):
    code, _, err = run_cli(capsys, "reduce", "particle.cfg",
                           "--chart", "nope")
    assert code == 2
    assert "nope" in json.loads(err)["message"]


def test_config_rejects_bad_numbers():
    with pytest.raises(ConfigError):
        cfgmod.parse_config("[system]\ncoordinates = x\nq_ref = banana\n"
                            "[metric]\n1\n")
    with pytest.raises(ConfigError):
        cfgmod.parse_config("[system]\ncoordinates = x\n[metric]\n1\n"
                            "[simulation]\ndt = fast\n")


def test_cli_accepts_negative_components(capsys):
    code, out, _ = run_cli(capsys, "field", "particle.cfg",
                           "--q", "0,-1,0", "--u", "-2,3")
    assert code == 0
    report = json.loads(out)
    assert np.allclose(report["ambient"]["q_dot"], [-2.0, 3.0, 2.0])
    assert np.allclose(report["ambient"]["p_dot"], [-3.0, 0.0, -3.0])


def test_cli_simulate_failure_truncates_and_exits_3(tmp_path, capsys):
    cfg = tmp_path / "fragile.cfg"
    cfg.write_text("""
[system]
coordinates = x, y

[metric]
1, 0
0, x*x + 0.000000000000000001
""")
    out_csv = tmp_path / "traj.csv"
    code, out, err = run_cli(capsys, "simulate", str(cfg),
                             "--q", "1,0", "--u", "-1,0",
                             "--t", "2", "--dt", "0.01",
                             "--out", str(out_csv),
                             "--diag", str(tmp_path / "diag.json"))
    assert code == 3
    assert json.loads(err)["error"] == "numerical"
    diag = json.loads(out)
    assert diag["failure"] is not None
    assert 0 < diag["steps"] < 200
    assert out_csv.exists()


def test_cli_module_entry_point(tmp_path):
    import subprocess
    import sys as _sys
    proc = subprocess.run(
        [_sys.executable, "-m", "nonholo", "field", "particle.cfg",
         "--q", "0,1,0", "--u", "2,3"],
        capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    report = json.loads(proc.stdout)
    assert np.allclose(report["ambient"]["p_dot"], [-3.0, 0.0, 3.0])
