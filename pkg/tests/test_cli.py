import math

import pytest

from dampwave.commands import suite
from dampwave.commands.suite import QUICK, CheckResult, SuiteRun
from dampwave.main import main
from dampwave.services.errors import NumericalError
from dampwave.storage.artifacts import read_csv

ZERO_DATA = ("p = 3", "poly_coeffs = 0, 0, 0, 1", "grid_n = 16", "dt = 0.1", "t_end = 0.5")


def _manifest(out_dir) -> dict:
    lines = (out_dir / "manifest.txt").read_text().splitlines()
    return dict(line.split(" = ", 1) for line in lines)


def test_simulate_zero_data(tmp_path, write_config):
    out = tmp_path / "sim"
    status = main(["simulate", "--config", str(write_config(*ZERO_DATA)), "--out", str(out)])
    assert status == 0
    _, ledger = read_csv(out / "ledger.csv")
    assert all(float(row[3]) == 0.0 for row in ledger)
    _, trajectory = read_csv(out / "trajectory.csv")
    assert all(float(row[2]) == 0.0 and float(row[3]) == 0.0 for row in trajectory)
    manifest = _manifest(out)
    assert manifest["seed"] == "0"
    assert manifest["config.p"] == "3"
    assert manifest["exit_status"] == "0"
    assert manifest["command"] == "simulate"
    assert "artifact.0" in manifest


def test_simulate_with_initial_data(tmp_path, write_config):
    out = tmp_path / "sim"
    path = write_config(*ZERO_DATA, "u0_expression = sin(pi*x)", "g_expression = sin(pi*x)", "scheme = mp")
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    manifest = _manifest(out)
    assert manifest["scheme"] == "mp"
    assert manifest["summary.converged"] == "1"


def test_config_typo_is_an_input_error(tmp_path, write_config):
    path = write_config("p = 3", "grdi_n = 32")
    out = tmp_path / "bad"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 2
    assert "grdi_n" in _manifest(out)["error"]


def test_simulate_needs_a_config(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 2


def test_invalid_thread_count(tmp_path):
    assert main(["poincare", "--p", "3", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_poincare_prints_pi_for_the_linear_problem(tmp_path, capsys):
    assert main(["poincare", "--p", "2", "--quick", "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    assert float(printed) == pytest.approx(math.pi, abs=2e-3)
    assert (tmp_path / "poincare_minimizer.csv").exists()


def test_growth_violation_needs_override(tmp_path, write_config):
    path = write_config("p = 3", "poly_coeffs = 0, 0, 0, -1", "grid_n = 16", "dt = 0.1", "t_end = 0.5")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "a")]) == 2
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "b"),
                 "--override-growth-check"]) == 0
    assert _manifest(tmp_path / "b")["summary.growth_satisfied"] == "0"


def test_newton_failure_exits_with_diagnostics(tmp_path, write_config):
    path = write_config("p = 3", "poly_coeffs = 0, 0, 0, 1", "grid_n = 31", "dt = 0.5", "t_end = 1",
                        "newton_max_iter = 1", "u0_expression = 5*sin(pi*x)")
    out = tmp_path / "fail"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 3
    failure = (out / "failure.txt").read_text()
    assert "halving dt" in failure
    assert _manifest(out)["exit_status"] == "3"


def test_p_override_from_the_command_line(tmp_path, write_config):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(write_config(*ZERO_DATA)), "--p", "4", "--out", str(out)]) == 0
    assert _manifest(out)["config.p"] == "4"


def test_poincare_rejects_p_at_most_one(tmp_path):
    assert main(["poincare", "--p", "1.0", "--out", str(tmp_path)]) == 2
    manifest = _manifest(tmp_path)
    assert manifest["exit_status"] == "2"
    assert "p > 1" in manifest["error"]


def test_stationary_set_of_an_odd_problem(tmp_path, write_config):
    path = write_config("p = 3", "poly_coeffs = 0, -20, 0, 1", "grid_n = 31", "dt = 0.05", "t_end = 2",
                        "n_starts = 8")
    out = tmp_path / "stat"
    assert main(["stationary", "--config", str(path), "--threads", "2", "--out", str(out)]) == 0
    manifest = _manifest(out)
    assert manifest["summary.closed_under_negation"] == "1"
    solutions = int(manifest["summary.solutions"])
    assert solutions >= 3
    header, rows = read_csv(out / "heteroclinic.csv")
    assert header == ["origin", "target", "target_distance", "lyapunov_drop", "converged"]
    assert len(rows) == solutions


def test_omega_limit_reports_invariance_and_velocity(tmp_path, write_config):
    path = write_config("p = 3", "poly_coeffs = 0, 2, 0, 1", "grid_n = 16", "dt = 0.1", "t_end = 1",
                        "ensemble_size = 2", "t_long = 5", "n_starts = 2", "amplitude_min = 1",
                        "amplitude_max = 1", "stride = 5")
    out = tmp_path / "omega"
    assert main(["omega-limit", "--config", str(path), "--out", str(out)]) == 0
    header, rows = read_csv(out / "omega_limit.csv")
    assert header == ["member", "distance_to_N", "settled", "invariance_change", "velocity_sup", "failure"]
    assert len(rows) == 2
    assert all(math.isfinite(float(r[3])) and math.isfinite(float(r[4])) for r in rows)
    manifest = _manifest(out)
    assert float(manifest["summary.velocity_eps"]) == pytest.approx(1.0 / 6.0)
    assert "summary.max_invariance_change" in manifest


def check_passes(run: SuiteRun) -> CheckResult:
    return CheckResult("passes", True, 0.0, 1.0, "")


def check_blows_up(run: SuiteRun) -> CheckResult:
    raise NumericalError("diverged")


def test_suite_reports_every_check(tmp_path, monkeypatch):
    monkeypatch.setattr(suite, "CHECKS", [check_passes, check_blows_up])
    assert main(["suite", "--quick", "--out", str(tmp_path)]) == 1
    header, rows = read_csv(tmp_path / "suite_summary.csv")
    assert header == ["check", "passed", "metric", "threshold", "detail"]
    assert [(r[0], r[1]) for r in rows] == [("passes", "1"), ("blows_up", "0")]
    assert _manifest(tmp_path)["summary.passed"] == "1"


def test_suite_passes_when_every_check_does(tmp_path, monkeypatch):
    monkeypatch.setattr(suite, "CHECKS", [check_passes])
    assert main(["suite", "--quick", "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize("command", ["verify-embedding", "verify-decay"])
def test_quick_verifications(tmp_path, command):
    assert main([command, "--quick", "--out", str(tmp_path)]) == 0
    assert _manifest(tmp_path)["exit_status"] == "0"


@pytest.mark.parametrize("check", [
    suite.check_monotonicity,
    suite.check_poincare,
    suite.check_linear_oracle,
    suite.check_decay,
    suite.check_embedding,
    suite.check_dependence,
    suite.check_convergence,
    suite.check_regularity,
    suite.check_ode_bound,
    suite.check_energy_inequality,
    suite.check_energy_equality,
    suite.check_determinism,
], ids=lambda c: c.__name__)
def test_quick_suite_check(tmp_path, check):
    result = check(SuiteRun(sizes=QUICK, seed=0, threads=2, out_dir=tmp_path))
    assert result.passed, result.detail
    assert any(tmp_path.rglob("*.csv"))
