"""The fitness/gradient oracle ``u -> (f(u), grad f(u))``.

Two backends answer the same query:

* ``exact`` evaluates the first-order GRAPE gradient directly from the
  forward/backward propagation cache; no emulated experiments are spent.
* ``sampled`` emulates the measurement protocol on a quantum simulator.
  Each gradient component is assembled from states in which an ideal
  +-pi/2 rotation of one spin is inserted after slice m, and every Pauli
  expectation is an independent experiment subject to the configured
  measurement model. One call costs ``(4 n M + 1) |S|`` experiments.

Noise is drawn from counter-based streams keyed by
``(master_seed, call_index, block)`` and laid out in a fixed canonical
order over ``(axis, m, k, sign, s)``, so the answer does not depend on the
order in which experiments are evaluated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .pauli import PAULI_MATRICES, SparsePauliState, as_hermitian, embed, hs_inner, to_matrix
from .propagation import (
    ControlPulse,
    backward_sweep,
    forward_sweep,
    slice_unitaries,
)
from .spin import ConfigError, SpinSystem, build_controls, build_drift

logger = logging.getLogger(__name__)

Matrix = NDArray[np.complex128]
PulseLike = Union[ControlPulse, NDArray[np.float64]]

_F_BLOCK = 0
_G_BLOCK = 1
AXES = ("x", "y")


@dataclass(frozen=True)
class MeasurementModel:
    """How a single Pauli expectation is estimated.

    ``gaussian`` adds N(0, sigma^2) to the normalised overlap
    ``Tr(rho P)/2^n``. ``born`` averages ``shots`` +-1 outcomes of ``P`` and
    needs a physical (unit-trace, PSD) initial state.
    """

    kind: str = "exact"
    sigma: float = 0.0
    shots: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "gaussian", "born"):
            raise ConfigError("model.kind", f"unknown measurement model {self.kind!r}")
        if not self.sigma >= 0:
            raise ConfigError("model.sigma", f"must be >= 0, got {self.sigma!r}")
        if self.kind == "born" and (not isinstance(self.shots, (int, np.integer)) or self.shots < 1):
            raise ConfigError("model.shots", f"must be an integer >= 1, got {self.shots!r}")

    @classmethod
    def from_doc(cls, doc: dict) -> tuple["MeasurementModel", int]:
        """Parse ``{"kind", "sigma"?, "shots"?, "master_seed"}``; returns (model, seed)."""
        if not isinstance(doc, dict):
            raise ConfigError("model", "must be a JSON object")
        if "kind" not in doc:
            raise ConfigError("model.kind", "missing required field")
        seed = doc.get("master_seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("model.master_seed", f"must be an unsigned 64-bit integer, got {seed!r}")
        return cls(doc["kind"], float(doc.get("sigma", 0.0)), int(doc.get("shots", 1))), seed


def _estimate(values: NDArray, model: MeasurementModel, rng: np.random.Generator) -> NDArray:
    """Vectorised estimator; a draw is consumed for every entry even when sigma=0."""
    if model.kind == "exact":
        return values
    if model.kind == "gaussian":
        return values + model.sigma * rng.standard_normal(values.shape)
    if np.any(np.abs(values) > 1 + 1e-9):
        raise ValueError("born model needs |expectation| <= 1")
    p = np.clip((1 + values) / 2, 0.0, 1.0)
    return 2.0 * rng.binomial(model.shots, p) / model.shots - 1.0


def estimate_expectation(true_value: float, model: MeasurementModel, stream: np.random.Generator) -> float:
    if model.kind == "born" and abs(true_value) > 1 + 1e-9:
        raise ValueError(f"born model needs |expectation| <= 1, got {true_value}")
    return float(_estimate(np.array([true_value]), model, stream)[0])


def rotation(axis: str, angle: float) -> Matrix:
    """Single-spin rotation ``exp(-i angle sigma_axis / 2)``."""
    sigma = PAULI_MATRICES[axis.upper()]
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * sigma


def commutator_by_rotation(rho: Matrix, k: int, axis: str, n: int | None = None) -> Matrix:
    """``[sigma_axis^k, rho]`` built from the two +-pi/2 rotated copies of ``rho``.

    ``k`` is a 0-based spin index.
    """
    if n is None:
        n = int(np.log2(rho.shape[0]))
    if axis not in AXES:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if not 0 <= k < n:
        raise IndexError(f"spin index {k} out of range for n={n}")
    Rp = embed(rotation(axis, np.pi / 2), k, n)
    Rm = embed(rotation(axis, -np.pi / 2), k, n)
    return 1j * (Rp @ rho @ Rp.conj().T - Rm @ rho @ Rm.conj().T)


def combine_rotated(plus: NDArray, minus: NDArray, tau: float) -> NDArray:
    """Gradient component from the +-rotated overlaps.

    ``plus``/``minus`` hold ``Tr(rho_pm target)/2^n`` with spins on the last
    axis. Substituting the rotation identity into the first-order gradient
    gives ``-i tau * i (plus - minus) = tau (plus - minus)``.
    """
    return tau * np.sum(plus - minus, axis=-1)


@dataclass(frozen=True)
class OracleAnswer:
    f: float
    g: NDArray[np.float64] = field(repr=False)  # (g_x[1..M], g_y[1..M])
    queries: int
    call_index: int = 0


def query_count(n: int, M: int, S: int) -> int:
    """Emulated experiments behind one sampled oracle call."""
    return (4 * n * M + 1) * S


@dataclass
class OracleConfig:
    sys: SpinSystem
    rho_i: Matrix = field(repr=False)
    target: SparsePauliState
    M: int
    tau: float
    model: MeasurementModel = field(default_factory=MeasurementModel)
    master_seed: int = 0
    backend: str = "exact"
    # Off only for tests that rescale the target deliberately.
    require_convertible: bool = True

    def __post_init__(self) -> None:
        self.rho_i = as_hermitian(self.rho_i)
        dim = 2**self.sys.n
        if self.rho_i.shape != (dim, dim):
            raise ConfigError("rho_i", f"shape {self.rho_i.shape} does not match n={self.sys.n}")
        if self.target.n != self.sys.n:
            raise ConfigError("target", f"target acts on {self.target.n} spins, system has {self.sys.n}")
        if self.M < 1 or not self.tau > 0:
            raise ConfigError("pulse", f"need M >= 1 and tau > 0, got M={self.M}, tau={self.tau}")
        if self.backend not in ("exact", "sampled"):
            raise ConfigError("oracle", f"unknown backend {self.backend!r}")
        if self.require_convertible:
            a = np.linalg.eigvalsh(self.rho_i)
            b = np.linalg.eigvalsh(self.target.to_matrix())
            if np.max(np.abs(a - b)) > 1e-6:
                raise ConfigError("target", "initial state and target have different spectra (not unitarily convertible)")
        if self.model.kind == "born":
            w = np.linalg.eigvalsh(self.rho_i)
            if w.min() < -1e-9 or abs(np.trace(self.rho_i).real - 1) > 1e-9:
                raise ConfigError("rho_i", "born model requires a unit-trace positive semidefinite initial state")


class Oracle:
    """Stateful oracle: counts calls and experiments, owns the noise streams."""

    def __init__(self, cfg: OracleConfig, start_call: int = 0):
        self.cfg = cfg
        self.n = cfg.sys.n
        self.dim = 2**self.n
        self.H = build_drift(cfg.sys)
        self.gens = build_controls(self.n)
        self._terms = cfg.target.items()
        self._coeffs = np.array([x for _, x in self._terms])
        self._term_mats = [to_matrix(p) for p, _ in self._terms]
        self._target_mat = sum(x * P for x, P in zip(self._coeffs, self._term_mats))
        self._gen = {"x": self.gens.gx, "y": self.gens.gy}
        self._rot = {
            (a, k, s): embed(rotation(a, s * np.pi / 2), k, self.n)
            for a in AXES
            for k in range(self.n)
            for s in (1, -1)
        }
        self.calls = start_call
        self.queries_total = 0
        self.evaluations = 0

    # -- helpers -----------------------------------------------------------

    @property
    def S(self) -> int:
        return len(self._terms)

    @property
    def experiments_per_query(self) -> int:
        return query_count(self.n, self.cfg.M, self.S) if self.cfg.backend == "sampled" else 0

    def as_pulse(self, u: PulseLike) -> ControlPulse:
        if isinstance(u, ControlPulse):
            pulse = u
        else:
            pulse = ControlPulse.from_flat(u, self.cfg.tau)
        if pulse.M != self.cfg.M:
            raise ConfigError("pulse", f"expected M={self.cfg.M} slices, got {pulse.M}")
        if pulse.tau != self.cfg.tau:
            raise ConfigError("pulse.tau", f"expected tau={self.cfg.tau}, got {pulse.tau}")
        return pulse

    def _rng(self, call: int, block: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.cfg.master_seed, spawn_key=(call, block))
        return np.random.default_rng(ss)

    def _next_call(self) -> int:
        c = self.calls
        self.calls += 1
        self.evaluations += 1
        return c

    def _term_values(self, rho: Matrix) -> NDArray:
        return np.array([hs_inner(rho, P) for P in self._term_mats])

    def _noisy_fitness(self, rho_f: Matrix, call: int, repeats: int = 1) -> float:
        vals = self._term_values(rho_f)
        model = self.cfg.model
        rng = self._rng(call, _F_BLOCK)
        if model.kind == "born":
            est = _estimate(np.broadcast_to(vals * self.dim, (repeats, self.S)), model, rng) / self.dim
        else:
            est = _estimate(np.broadcast_to(vals, (repeats, self.S)).copy(), model, rng)
        return float(np.mean(est @ self._coeffs))

    # -- public API --------------------------------------------------------

    def fitness(self, u: PulseLike, repeats: int = 1) -> float:
        """Fitness only; the sampled backend spends ``repeats * |S|`` experiments."""
        pulse = self.as_pulse(u)
        call = self._next_call()
        Us = slice_unitaries(pulse, self.H, self.gens)
        rho = forward_sweep(Us, self.cfg.rho_i)[-1]
        if self.cfg.backend == "exact":
            return hs_inner(rho, self._target_mat)
        self.queries_total += repeats * self.S
        return self._noisy_fitness(rho, call, repeats)

    def query(self, u: PulseLike) -> OracleAnswer:
        if self.cfg.backend == "exact":
            return self.gradient_exact(u)
        return self.gradient_sampled(u)

    def gradient_exact(self, u: PulseLike) -> OracleAnswer:
        pulse = self.as_pulse(u)
        call = self._next_call()
        Us = slice_unitaries(pulse, self.H, self.gens)
        fwd = forward_sweep(Us, self.cfg.rho_i)
        lam = backward_sweep(Us, self._target_mat)
        M, tau, d = pulse.M, pulse.tau, self.dim
        g = np.empty(2 * M)
        for ai, a in enumerate(AXES):
            G = self._gen[a]
            for m in range(1, M + 1):
                rho = fwd[m]
                comm = G @ rho - rho @ G
                # Tr(-i tau [G, rho_m] lam_m) / d; the trace is purely imaginary.
                g[ai * M + m - 1] = (-1j * tau * np.sum(comm * lam[m].T) / d).real
        f = hs_inner(fwd[-1], self._target_mat)
        return OracleAnswer(f, g, 0, call)

    def gradient_sampled(self, u: PulseLike) -> OracleAnswer:
        pulse = self.as_pulse(u)
        call = self._next_call()
        n, M, S, d, tau = self.n, pulse.M, self.S, self.dim, pulse.tau
        model = self.cfg.model
        Us = slice_unitaries(pulse, self.H, self.gens)
        fwd = forward_sweep(Us, self.cfg.rho_i)
        lam_terms = [backward_sweep(Us, P) for P in self._term_mats]

        # overlaps[a, m, k, sign, s] = Tr(rho^{km}_{a,sign} P_s) / 2^n
        overlaps = np.empty((2, M, n, 2, S))
        for ai, a in enumerate(AXES):
            for m in range(1, M + 1):
                rho = fwd[m]
                lam_stack = np.stack([lt[m] for lt in lam_terms])
                for k in range(n):
                    for si, sign in enumerate((1, -1)):
                        R = self._rot[(a, k, sign)]
                        rot = R @ rho @ R.conj().T
                        overlaps[ai, m - 1, k, si] = np.einsum("ij,sji->s", rot, lam_stack).real / d

        rng = self._rng(call, _G_BLOCK)
        if model.kind == "born":
            est = _estimate(overlaps * d, model, rng) / d
        else:
            est = _estimate(overlaps, model, rng)
        weighted = est @ self._coeffs  # (2, M, n, 2)
        g = combine_rotated(weighted[..., 0], weighted[..., 1], tau).reshape(2 * M)

        f = self._noisy_fitness(fwd[-1], call)
        queries = query_count(n, M, S)
        self.queries_total += queries
        return OracleAnswer(f, g, queries, call)
