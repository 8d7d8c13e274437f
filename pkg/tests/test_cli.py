import json
import os
import subprocess
import sys

import pytest

from flexsched.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from flexsched.generators import SyntheticConfig, generate_synthetic
from flexsched.io import save_instance


def _solve(out, *args):
    return main(["solve", "--out", str(out), *args])


def test_solve_three_rows(tmp_path, capsys):
    code = _solve(tmp_path, "--generate", "synthetic", "--J", "8", "--T", "8", "--seed", "7",
                  "--algos", "rar,greedy,oracle")
    assert code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert sorted(report["algorithms"]) == ["greedy", "oracle", "rar"]
    assert all(r["status"] == "ok" for r in report["algorithms"].values())
    assert (tmp_path / "loads.csv").read_text().startswith("t,L_rar,L_oracle,L_greedy,R\n")
    assert "oracle" in capsys.readouterr().out


def test_solve_large_oracle_budget_exit(tmp_path):
    code = _solve(tmp_path, "--generate", "synthetic", "--J", "100", "--T", "24", "--seed", "7",
                  "--algos", "rar,greedy,oracle")
    assert code == EXIT_BUDGET
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["algorithms"]["oracle"]["status"] == "budget_exceeded"
    assert report["algorithms"]["rar"]["status"] == "ok"


def test_solve_adversarial(tmp_path):
    code = _solve(tmp_path, "--adversarial", "--N", "3", "--T", "4", "--round-mode", "max_probability",
                  "--algos", "rar,relax-round,oracle", "--oracle-budget", "20000000")
    assert code == EXIT_OK
    algos = json.loads((tmp_path / "report.json").read_text())["algorithms"]
    assert algos["relax-round"]["per_job_gap"] >= 3 * (4 - 1)
    bound = json.loads((tmp_path / "report.json").read_text())["instance"]["theorem_bound"]
    assert algos["rar"]["cost"] - algos["oracle"]["cost"] <= bound
    assert algos["rar"]["per_job_gap"] <= 0.01


def test_solve_from_file(tmp_path):
    inst = generate_synthetic(SyntheticConfig(J=10, T=10), 2)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    assert _solve(tmp_path / "o", "--instance", str(path), "--algos", "rar", "--audit-pricing") == EXIT_OK
    rar = json.loads((tmp_path / "o" / "report.json").read_text())["algorithms"]["rar"]
    assert rar["pricing"]["self_scheduling"]["violations"] == []


def test_config_errors(tmp_path, capsys):
    assert _solve(tmp_path, "--instance", str(tmp_path / "missing.json")) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err
    assert _solve(tmp_path, "--generate", "synthetic", "--algos", "rar,simplex") == EXIT_CONFIG
    assert _solve(tmp_path) == EXIT_CONFIG
    assert main(["sweep", "--out", str(tmp_path), "--J-list", "a,b"]) == EXIT_CONFIG


def test_report_byte_identical_without_timing(tmp_path):
    args = ["--generate", "synthetic", "--J", "30", "--T", "12", "--seed", "3", "--algos", "rar,greedy,relax-round",
            "--no-timing", "--audit-pricing"]
    assert _solve(tmp_path / "a", *args) == EXIT_OK
    assert _solve(tmp_path / "b", *args) == EXIT_OK
    for name in ("report.json", "loads.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "wall_time" not in (tmp_path / "a" / "report.json").read_text()


def test_seed_env_override(tmp_path, monkeypatch):
    args = ["--generate", "synthetic", "--J", "20", "--T", "10", "--algos", "rar", "--no-timing"]
    assert _solve(tmp_path / "flag", "--seed", "11", *args) == EXIT_OK
    monkeypatch.setenv("FLEXSCHED_SEED", "11")
    assert _solve(tmp_path / "env", "--seed", "5", *args) == EXIT_OK
    assert (tmp_path / "flag" / "report.json").read_bytes() == (tmp_path / "env" / "report.json").read_bytes()
    monkeypatch.setenv("FLEXSCHED_SEED", "eleven")
    assert _solve(tmp_path / "bad", *args) == EXIT_CONFIG


def test_sweep_csv_deterministic(tmp_path):
    args = ["--J-list", "6,10", "--instances", "2", "--T", "8", "--algos", "rar,greedy,oracle", "--no-timing",
            "--seed", "2"]
    assert main(["sweep", "--out", str(tmp_path / "a"), *args]) == EXIT_OK
    assert main(["sweep", "--out", str(tmp_path / "b"), "--workers", "2", *args]) == EXIT_OK
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert a.count(b"\nsummary,") == 2 * 2 * 3


def test_verify_command(capsys):
    assert main(["verify", "--quick"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 6 and "FAIL" not in out


def test_verify_failure_exit(monkeypatch, capsys):
    from flexsched import cli
    from flexsched.harness import CheckResult

    monkeypatch.setattr(cli, "verify", lambda **kw: [CheckResult("losslessness", False, "broken")])
    assert main(["verify"]) == EXIT_FAIL
    assert "failing properties: losslessness" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    env = dict(os.environ, FLEXSCHED_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-m", "flexsched.cli", "solve", "--generate", "adversarial",
                           "--N", "1", "--T", "3", "--algos", "rar,oracle", "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env, timeout=120)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert (tmp_path / "report.json").exists()


@pytest.mark.parametrize("flag,expected", [("1", "python"), ("", None)])
def test_backend_switch(flag, expected):
    env = dict(os.environ, FLEXSCHED_PURE_PYTHON=flag)
    code = "import flexsched; print(flexsched.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env,
                         timeout=60).stdout.strip()
    if expected is None:
        from flexsched import _kernels

        expected = _kernels.available()[0]
    assert out == expected
