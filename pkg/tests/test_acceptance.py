"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also repeated in the terminal summary under "acceptance criteria".
"""

import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from hybridqoc.benchmarks import benchmark_start, ising_benchmark, iterations_to, random_instance, single_qubit
from hybridqoc.checks import fd_relative_error, scaled_fd_instance
from hybridqoc.cli import main
from hybridqoc.oracle import MeasurementModel, Oracle, OracleConfig, query_count
from hybridqoc.optimize import StopRule, run
from hybridqoc.pauli import PauliString, SparsePauliState, to_matrix
from hybridqoc.propagation import ControlPulse, discretize_duration
from hybridqoc.spin import SpinSystem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_c1_path_equivalence(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n, M, S = int(rng.integers(1, 5)), int(rng.integers(1, 9)), int(rng.integers(1, 4))
        o, u = random_instance(rng, n, M, S)
        worst = max(worst, float(np.max(np.abs(o.gradient_sampled(u).g - o.gradient_exact(u).g))))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and secs <= 60
    report("C1 path equivalence", ok, f"50 instances, max componentwise error {worst:.2e}, {secs:.1f}s")
    assert ok


def test_c2_finite_difference_consistency(report):
    rng = np.random.default_rng(2024)
    e1, e2 = [], []
    for _ in range(20):
        o, u = scaled_fd_instance(rng, int(rng.integers(1, 5)), int(rng.integers(1, 9)), int(rng.integers(1, 4)))
        e1.append(fd_relative_error(o, u))
        e2.append(fd_relative_error(Oracle(replace(o.cfg, tau=o.cfg.tau / 2)), u))
    e1, e2 = np.array(e1), np.array(e2)
    ratio = e1.max() / e2.max()
    ok = bool(np.all(e1 <= 2e-2)) and 1.5 <= ratio <= 2.5
    report(
        "C2 finite-difference consistency",
        ok,
        f"tau*||A|| = 0.05: max rel err {e1.max():.3e} ({int(np.sum(e1 > 2e-2))}/20 above 2e-2), "
        f"median {np.median(e1):.3e}; worst-case halving ratio {ratio:.2f}",
    )
    assert ok


def test_c3_query_accounting(report):
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(100):
        n, M, S = int(rng.integers(1, 7)), int(rng.integers(1, 51)), int(rng.integers(1, 6))
        o, u = random_instance(rng, n, M, min(S, 4**n), tau=0.01)
        ans = o.gradient_sampled(u)
        bad += ans.queries != (4 * n * M + 1) * o.S or o.queries_total != ans.queries
    nine_spin_count = query_count(9, 818, 1)
    ok = bad == 0 and nine_spin_count == 29449
    report("C3 query accounting", ok, f"100 random sampled calls, {bad} mismatches; n=9, M=818, |S|=1 -> {nine_spin_count}")
    assert ok


def test_c4_benchmark_convergence(report):
    t0 = time.perf_counter()
    finals = []
    for seed in range(1, 11):
        o = Oracle(ising_benchmark())
        res = run(o, benchmark_start(seed).flat(), "ga", StopRule(max_evals=2000, target_f=0.99))
        finals.append(res.best_f)
    secs = time.perf_counter() - t0
    hits = sum(f >= 0.99 for f in finals)
    ok = hits >= 8 and secs <= 300
    report(
        "C4 benchmark convergence",
        ok,
        f"{hits}/10 seeds reach f >= 0.99 within 2000 evaluations; best f per seed in "
        f"[{min(finals):.6f}, {max(finals):.6f}], {secs:.0f}s",
    )
    assert ok


def test_c5_optimizer_ordering(report):
    its = {}
    for rule in ("qn-bfgs", "cg-fr", "ga"):
        o = Oracle(ising_benchmark())
        res = run(o, benchmark_start(1).flat(), rule, StopRule(max_evals=2000, target_f=0.95))
        its[rule] = iterations_to(res.history, 0.95)
    reached = None not in its.values()
    ok = reached and its["qn-bfgs"] <= its["cg-fr"] <= its["ga"]
    report("C5 optimizer ordering", ok, "iterations to f >= 0.95 on seed 1: " + ", ".join(f"{k}={v}" for k, v in its.items()))
    assert ok


def test_c6_discretization(report):
    M = discretize_duration(16.36e-3, 20e-6)
    report("C6 discretization", M == 818, f"discretize_duration(16.36e-3, 20e-6) = {M}")
    assert M == 818


def test_c7_noise_calibration(report):
    o = Oracle(single_qubit("sampled", MeasurementModel("gaussian", 0.01), master_seed=7))
    u = np.array([0.2, 0.5])
    std = float(np.std([o.fitness(u) for _ in range(200)], ddof=1))

    u0 = benchmark_start(1).flat()
    clean = run(Oracle(ising_benchmark()), u0, "ga", StopRule(max_evals=2000))
    noisy_oracle = Oracle(ising_benchmark("sampled", MeasurementModel("gaussian", 0.01), master_seed=11))
    noisy = run(noisy_oracle, u0, "ga", StopRule(max_evals=2000))
    gap = abs(noisy.best_f - clean.final.f)
    ok = 0.007 <= std <= 0.013 and gap <= 0.05
    report(
        "C7 noise calibration",
        ok,
        f"sample std {std:.4f} over 200 repeats; noisy best f {noisy.best_f:.4f} vs noiseless final "
        f"{clean.final.f:.4f} (gap {gap:.4f}, status {noisy.status})",
    )
    assert ok


def test_c8_structural_substitute(report):
    """The 9-spin molecular fidelity needs molecular parameters that are not available here; exercise the pipeline instead."""
    # Nine-spin shapes: one exact oracle call with a seven-body correlated target.
    rng = np.random.default_rng(8)
    offsets = rng.uniform(-2000, 2000, size=9)
    J = np.zeros((9, 9))
    for k in range(8):
        J[k, k + 1] = J[k + 1, k] = rng.uniform(1, 70)
    sys9 = SpinSystem.from_nmr(offsets, J)
    rho9 = to_matrix(PauliString("IZIIIIIII"))
    tgt9 = SparsePauliState.parse_inline("ZZZIZIZZZ:1.0")
    o9 = Oracle(OracleConfig(sys9, rho9, tgt9, M=2, tau=20e-6, require_convertible=True))
    a9 = o9.gradient_exact(ControlPulse.random(2, 20e-6, -1e3, 1e3, rng))
    nine_ok = np.all(np.isfinite(a9.g)) and a9.g.shape == (4,) and abs(a9.f) <= 1 + 1e-12

    # Six-spin smoke run on the sampled oracle.
    J6 = np.zeros((6, 6))
    for k in range(5):
        J6[k, k + 1] = J6[k + 1, k] = 50.0
    sys6 = SpinSystem.from_nmr(rng.uniform(-300, 300, size=6), J6)
    cfg6 = OracleConfig(sys6, to_matrix(PauliString("ZIIIII")), SparsePauliState.parse_inline("ZZIIII:1.0"),
                        M=6, tau=1e-3, backend="sampled")
    o6 = Oracle(cfg6)
    first = o6.gradient_sampled(ControlPulse.random(6, 1e-3, -2000, 2000, rng))
    per_call = query_count(6, 6, 1)
    o6 = Oracle(cfg6)
    res = run(o6, ControlPulse.random(6, 1e-3, -2000, 2000, rng).flat(), "qn-bfgs", StopRule(max_iters=10))
    smoke_ok = first.queries == per_call == 145 and res.history[-1].f > res.history[0].f
    ok = bool(nine_ok and smoke_ok and query_count(9, 818, 1) == 29449)
    report(
        "C8 molecular-scale fidelity (not reproducible; structural substitute)",
        ok,
        f"9-spin exact call ok={bool(nine_ok)}; 6-spin sampled run f {res.history[0].f:.4f} -> "
        f"{res.history[-1].f:.4f}, {per_call} experiments per call",
    )
    assert ok


def test_c9_determinism(report, tmp_path):
    def once(out):
        return main([
            "run", "--system", str(CONFIGS / "ising3.json"), "--initial", "ZII:1", "--target", "ZZZ:1",
            "--tau", "0.05", "--slices", "40", "--random-init=-5,5", "--seed", "1",
            "--oracle", "sampled", "--noise-sigma", "0.01", "--method", "qn-bfgs", "--max-iters", "15",
            "--out", str(out),
        ])

    codes = (once(tmp_path / "a"), once(tmp_path / "b"))
    a, b = ((tmp_path / d / "convergence.csv").read_bytes() for d in "ab")
    rows = len(a.splitlines()) - 1
    ok = codes == (0, 0) and a == b and rows == json.loads((tmp_path / "a" / "result.json").read_text())["iterations"]
    report("C9 determinism", ok, f"two noisy runs, {rows} rows, byte-identical={a == b}")
    assert ok
