"""Built-in invariant suite behind ``hybridqoc check``.

Each check runs on small seeded instances and returns a :class:`CheckResult`.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .benchmarks import random_instance
from .oracle import AXES, Oracle, commutator_by_rotation, query_count
from .pauli import MAX_SPINS, PAULI_MATRICES, PauliString, embed, hs_inner, to_matrix
from .propagation import ControlPulse, slice_propagator
from .spin import ConfigError, build_controls


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (A + A.conj().T) / 2


def check_orthonormality(n: int, rng: np.random.Generator) -> CheckResult:
    n = min(n, 3)
    mats = [to_matrix(PauliString("".join(t))) for t in itertools.product("IXYZ", repeat=n)]
    worst = 0.0
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            worst = max(worst, abs(hs_inner(a, b) - (i == j)))
    return CheckResult("orthonormality", worst <= 1e-12, f"n={n}, max deviation {worst:.2e}")


def check_unitarity(n: int, rng: np.random.Generator) -> CheckResult:
    gens = build_controls(n)
    worst = 0.0
    for _ in range(10):
        H = _random_hermitian(rng, 2**n) * 1e3
        ux, uy = rng.uniform(-1e5, 1e5, size=2)
        U = slice_propagator(H, gens, ux, uy, float(rng.uniform(1e-6, 1e-3)))
        worst = max(worst, float(np.max(np.abs(U.conj().T @ U - np.eye(2**n)))))
    return CheckResult("unitarity", worst <= 1e-10, f"n={n}, max |U^dag U - I| {worst:.2e}")


def check_rotation_identity(n: int, rng: np.random.Generator) -> CheckResult:
    rho = _random_hermitian(rng, 2**n)
    worst = 0.0
    for k in range(n):
        for a in AXES:
            S = embed(PAULI_MATRICES[a.upper()], k, n)
            direct = S @ rho - rho @ S
            worst = max(worst, float(np.max(np.abs(commutator_by_rotation(rho, k, a, n) - direct))))
    return CheckResult("rotation-commutator identity", worst <= 1e-12, f"n={n}, max error {worst:.2e}")


def check_path_equivalence(n: int, rng: np.random.Generator, instances: int = 5) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        oracle, u = random_instance(rng, int(rng.integers(1, n + 1)), int(rng.integers(1, 6)), int(rng.integers(1, 4)))
        a = oracle.gradient_exact(u)
        b = oracle.gradient_sampled(u)
        worst = max(worst, float(np.max(np.abs(a.g - b.g))), abs(a.f - b.f))
    return CheckResult("path equivalence", worst <= 1e-10, f"{instances} instances, max |g_exact - g_sampled| {worst:.2e}")


def fd_relative_error(oracle, u: np.ndarray, rel_step: float = 1e-6) -> float:
    """``|g - g_fd| / |g_fd|`` with central differences of the exact fitness."""
    g = oracle.gradient_exact(u).g
    fd = np.empty_like(u)
    for j in range(u.size):
        h = rel_step * max(1.0, abs(u[j]))
        e = np.zeros_like(u)
        e[j] = h
        fd[j] = (oracle.fitness(u + e) - oracle.fitness(u - e)) / (2 * h)
    return float(np.linalg.norm(g - fd) / np.linalg.norm(fd))


def generator_norm(oracle, u: np.ndarray) -> float:
    """Largest ``||H + ux gx + uy gy||_2`` over the slices of ``u``."""
    pulse = ControlPulse.from_flat(u, oracle.cfg.tau)
    return max(
        float(np.linalg.norm(oracle.H + ux * oracle.gens.gx + uy * oracle.gens.gy, 2)) for ux, uy in pulse.amps
    )


def scaled_fd_instance(rng: np.random.Generator, n: int, M: int, S: int, tau_norm: float = 0.05):
    """Random exact-backend instance with tau chosen so that ``tau * ||generator|| = tau_norm``."""
    oracle, u = random_instance(rng, n, M, S, backend="exact", tau=1.0)
    rho = oracle.cfg.rho_i
    cfg = replace(oracle.cfg, rho_i=rho / np.sqrt(hs_inner(rho, rho)), tau=tau_norm / generator_norm(oracle, u))
    return Oracle(cfg), u


def check_finite_differences(n: int, rng: np.random.Generator, instances: int = 8) -> CheckResult:
    """First-order behaviour of the gradient: typical error below tau*||A|| and halving with tau.

    Medians are used because instances close to a first-order-degenerate point
    have relative errors of order one regardless of tau.
    """
    errs, ratios = [], []
    for _ in range(instances):
        oracle, u = scaled_fd_instance(rng, int(rng.integers(1, min(n, 3) + 1)), int(rng.integers(1, 5)), 1)
        e1 = fd_relative_error(oracle, u)
        e2 = fd_relative_error(Oracle(replace(oracle.cfg, tau=oracle.cfg.tau / 2)), u)
        errs.append(e1)
        ratios.append(e1 / e2)
    med, ratio = float(np.median(errs)), float(np.median(ratios))
    ok = med <= 0.05 and 1.5 <= ratio <= 2.5
    return CheckResult(
        "finite-difference consistency", ok, f"{instances} instances, median relative error {med:.2e}, median halving ratio {ratio:.2f}"
    )


def check_query_accounting(n: int, rng: np.random.Generator, instances: int = 5) -> CheckResult:
    bad = []
    for _ in range(instances):
        nn, M, S = int(rng.integers(1, n + 1)), int(rng.integers(1, 6)), int(rng.integers(1, 4))
        oracle, u = random_instance(rng, nn, M, S)
        ans = oracle.gradient_sampled(u)
        if ans.queries != query_count(nn, M, S) or ans.queries != (4 * nn * M + 1) * S:
            bad.append((nn, M, S, ans.queries))
    ok = not bad and query_count(9, 818, 1) == 29449
    return CheckResult("query accounting", ok, "ok" if ok else f"mismatches {bad}")


CHECKS: list[Callable[[int, np.random.Generator], CheckResult]] = [
    check_orthonormality,
    check_unitarity,
    check_rotation_identity,
    check_path_equivalence,
    check_finite_differences,
    check_query_accounting,
]


def run_checks(n: int = 3, seed: int = 7) -> list[CheckResult]:
    if n < 1 or n > MAX_SPINS:
        raise ConfigError("check.n", f"spin count {n} outside [1, {MAX_SPINS}]")
    out = []
    for fn in CHECKS:
        rng = np.random.default_rng([seed, len(out)])
        t0 = time.perf_counter()
        res = fn(n, rng)
        out.append(CheckResult(res.name, res.passed, res.detail, time.perf_counter() - t0))
    return out
