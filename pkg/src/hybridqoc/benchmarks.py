"""Ready-made problem instances used by the tests, the CLI self-check and scripts."""

from __future__ import annotations

import numpy as np

from .oracle import MeasurementModel, Oracle, OracleConfig
from .pauli import PauliString, SparsePauliState, to_matrix
from .propagation import ControlPulse
from .spin import SpinSystem

ISING_COUPLING = 2 * np.pi * 1.0  # rad/s


def ising_chain3(ratio: float = 1.0) -> SpinSystem:
    """Two-bond Ising chain; ``ratio`` scales the second bond (1.0 keeps the chain mirror symmetric)."""
    return SpinSystem.from_terms(3, [(ISING_COUPLING, "ZZI"), (ratio * ISING_COUPLING, "IZZ")])


def ising_benchmark(
    backend: str = "exact",
    model: MeasurementModel | None = None,
    master_seed: int = 0,
    M: int = 40,
    tau: float = 0.05,
    ratio: float = 1.0,
) -> OracleConfig:
    """3-spin Ising chain, Z on spin 1 steered to ZZZ."""
    return OracleConfig(
        sys=ising_chain3(ratio),
        rho_i=to_matrix(PauliString("ZII")),
        target=SparsePauliState.from_pairs([("ZZZ", 1.0)]),
        M=M,
        tau=tau,
        model=model or MeasurementModel(),
        master_seed=master_seed,
        backend=backend,
    )


def benchmark_start(seed: int, M: int = 40, tau: float = 0.05, lo: float = -5.0, hi: float = 5.0) -> ControlPulse:
    return ControlPulse.random(M, tau, lo, hi, np.random.default_rng(seed))


def iterations_to(history, threshold: float) -> int | None:
    """Iteration index of the first history row with ``f >= threshold``."""
    return next((h.iter for h in history if h.f >= threshold), None)


def single_qubit(backend: str = "exact", model: MeasurementModel | None = None, coeff: float = 1.0,
                 tau: float = 1.0, master_seed: int = 0) -> OracleConfig:
    """Z -> X on a bare spin; the landscape is ``coeff * sin(2 uy tau)`` at ux = 0."""
    return OracleConfig(
        sys=SpinSystem.from_terms(1, [(0.0, "Z")]),
        rho_i=to_matrix(PauliString("Z")),
        target=SparsePauliState.from_pairs([("X", coeff)]),
        M=1,
        tau=tau,
        model=model or MeasurementModel(),
        master_seed=master_seed,
        backend=backend,
        require_convertible=coeff == 1.0,
    )


def random_instance(rng: np.random.Generator, n: int, M: int, n_terms: int, backend: str = "sampled",
                    tau: float | None = None, amp: float = 3.0) -> tuple[Oracle, np.ndarray]:
    """Random local Hamiltonian, random Hermitian initial state and sparse target."""
    letters = "IXYZ"
    terms = []
    for _ in range(rng.integers(1, 2 * n + 1)):
        label = ["I"] * n
        for k in rng.choice(n, size=min(n, rng.integers(1, 3)), replace=False):
            label[k] = letters[rng.integers(1, 4)]
        terms.append((float(rng.normal()), "".join(label)))
    sys = SpinSystem.from_terms(n, terms)
    A = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = (A + A.conj().T) / 2
    labels = set()
    while len(labels) < n_terms:
        labels.add("".join(letters[i] for i in rng.integers(0, 4, size=n)))
    target = SparsePauliState.from_pairs([(lab, float(rng.uniform(0.2, 1.0))) for lab in sorted(labels)])
    tau = float(rng.uniform(0.01, 0.2)) if tau is None else tau
    cfg = OracleConfig(sys, rho, target, M, tau, backend=backend, require_convertible=False)
    return Oracle(cfg), rng.uniform(-amp, amp, size=2 * M)
