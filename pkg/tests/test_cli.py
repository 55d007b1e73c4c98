import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hybridqoc import oracle as oracle_mod
from hybridqoc.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ISING = ["--system", str(CONFIGS / "ising3.json"), "--initial", "ZII:1", "--target", "ZZZ:1"]
QUBIT = ["--system", str(CONFIGS / "qubit.json"), "--initial", "Z", "--target", "X:1"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def bench_run(out, *extra):
    return ["run", *ISING, "--tau", "0.05", "--slices", "40", "--random-init=-5,5", "--seed", "1",
            "--out", str(out), *extra]


def test_run_benchmark_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run_cli(capsys, *bench_run(out, "--target-f", "0.49", "--max-evals", "2000"))
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["status"] == "converged" and res["final_f"] >= 0.49
    assert set(res) >= {"status", "final_f", "iterations", "total_queries", "wall_time_s", "manifest"}
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "iter,f,grad_norm,alpha,queries_cum"
    assert len(lines) - 1 == res["iterations"]
    assert (out / "final_pulse.csv").exists() and (out / "manifest.json").exists()
    assert json.loads(stdout)["status"] == "converged"


def test_missing_system_file(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code, _, err = run_cli(capsys, "eval", "--system", str(missing), "--initial", "Z", "--target", "Z",
                           "--tau", "1", "--slices", "1")
    assert code == 1
    assert str(missing) in err


def test_zero_query_budget_spends_one_call(tmp_path, capsys):
    out = tmp_path / "b0"
    code, _, _ = run_cli(capsys, *bench_run(out, "--oracle", "sampled", "--query-budget", "0"))
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["status"] == "budget"
    assert res["total_queries"] == (4 * 3 * 40 + 1) * 1
    assert res["iterations"] == 1


def test_eval_quarter_turn(capsys):
    code, stdout, _ = run_cli(capsys, "eval", *QUBIT, "--pulse", str(CONFIGS / "quarter_turn.csv"))
    assert code == 0
    doc = json.loads(stdout)
    assert doc["f"] == pytest.approx(1.0, abs=1e-12)
    assert doc["g"][1] == pytest.approx(0.0, abs=1e-10)
    assert doc["queries"] == 0


def test_eval_exact_vs_sampled(capsys):
    common = ["eval", *ISING, "--tau", "0.05", "--slices", "6", "--random-init=-5,5", "--seed", "4"]
    _, a, _ = run_cli(capsys, *common)
    _, b, _ = run_cli(capsys, *common, "--oracle", "sampled")
    np.testing.assert_allclose(json.loads(b)["g"], json.loads(a)["g"], atol=1e-10, rtol=0)


def test_eval_sampled_query_count(capsys, tmp_path):
    system = tmp_path / "two.json"
    system.write_text(json.dumps({"n": 2, "nmr": {"offsets_hz": [10.0, -4.0], "couplings_hz": [[0, 3.0], [3.0, 0]]}}))
    _, stdout, _ = run_cli(capsys, "eval", "--system", str(system), "--initial", "ZI", "--target", "IZ:1",
                           "--tau", "0.01", "--slices", "3", "--oracle", "sampled")
    assert json.loads(stdout)["queries"] == 25


def test_eval_deterministic_under_seed(capsys):
    argv = ["eval", *ISING, "--tau", "0.05", "--slices", "5", "--random-init=-5,5", "--seed", "9",
            "--oracle", "sampled", "--noise-sigma", "0.02"]
    _, a, _ = run_cli(capsys, *argv)
    _, b, _ = run_cli(capsys, *argv)
    assert a == b


def test_check_passes(capsys):
    code, stdout, _ = run_cli(capsys, "check")
    assert code == 0
    assert "6/6 checks passed" in stdout


def test_check_detects_mutated_combination(capsys, monkeypatch):
    original = oracle_mod.combine_rotated
    monkeypatch.setattr(oracle_mod, "combine_rotated", lambda p, m, tau: -original(p, m, tau))
    code, stdout, _ = run_cli(capsys, "check")
    assert code == 1
    assert any(line.startswith("FAIL") and "path equivalence" in line for line in stdout.splitlines())


def test_check_spin_cap(capsys):
    code, _, err = run_cli(capsys, "check", "--n", "13")
    assert code == 1 and "--n" in err


@pytest.mark.parametrize("oracle_args", [[], ["--oracle", "sampled", "--noise-sigma", "0.01"]])
def test_round_trip_final_f(tmp_path, capsys, oracle_args):
    out = tmp_path / "rt"
    run_cli(capsys, *bench_run(out, "--max-iters", "6", *oracle_args))
    res = json.loads((out / "result.json").read_text())
    argv = ["eval", *ISING, "--pulse", str(out / "final_pulse.csv"), "--seed", "1", *oracle_args]
    if oracle_args:
        argv += ["--call-index", str(res["final_call_index"])]
    _, stdout, _ = run_cli(capsys, *argv)
    f = json.loads(stdout)["f"]
    if oracle_args:
        assert f == res["final_f"]
    else:
        assert f == pytest.approx(res["final_f"], abs=1e-12)


def test_convergence_log_invariants_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    extra = ["--method", "cg-pr", "--oracle", "sampled", "--noise-sigma", "0.01", "--max-iters", "10"]
    run_cli(capsys, *bench_run(a, *extra))
    run_cli(capsys, *bench_run(b, *extra))
    ca, cb = (a / "convergence.csv").read_bytes(), (b / "convergence.csv").read_bytes()
    assert ca == cb
    rows = ca.decode().splitlines()[1:]
    q = [int(r.split(",")[-1]) for r in rows]
    assert q == sorted(q)
    assert len(rows) == json.loads((a / "result.json").read_text())["iterations"]


def test_refuses_to_overwrite(tmp_path, capsys):
    out = tmp_path / "once"
    assert run_cli(capsys, *bench_run(out, "--max-iters", "1"))[0] == 0
    before = (out / "manifest.json").read_bytes()
    code, _, err = run_cli(capsys, *bench_run(out, "--max-iters", "2"))
    assert code == 1 and "refusing" in err
    assert (out / "manifest.json").read_bytes() == before


@pytest.mark.parametrize(
    "argv, needle",
    [
        (["eval", *ISING, "--tau", "0.05"], "--tau/--slices"),
        (["eval", *ISING, "--tau", "0.05", "--slices", "2", "--target", "ZZ:1"], "length"),
        (["eval", *QUBIT[:4], "--target", "X:0.5", "--tau", "1", "--slices", "1"], "spectra"),
        (["eval", *ISING, "--tau", "0.05", "--slices", "2", "--random-init=5,-5"], "lo < hi"),
        (["eval", *ISING, "--tau", "0.05", "--slices", "2", "--shots", "10"], "positive semidefinite"),
    ],
)
def test_config_errors_exit_one(capsys, argv, needle):
    code, _, err = run_cli(capsys, *argv)
    assert code == 1
    assert needle in err


def test_usage_error_exits_one(capsys):
    assert main(["run", "--bogus"]) == 1


def test_stop_rule_required(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", *ISING, "--tau", "0.05", "--slices", "2", "--out", str(tmp_path / "x"))
    assert code == 1 and "stop" in err
    assert not (tmp_path / "x").exists()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "hybridqoc.cli", "eval", *QUBIT, "--pulse", str(CONFIGS / "quarter_turn.csv")],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(proc.stdout)["f"] == pytest.approx(1.0)
