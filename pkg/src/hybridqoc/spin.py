"""Drift and collective control Hamiltonians for n-spin systems.

Two drift forms are supported: a generic list of local Pauli terms with
angular-frequency coefficients, and the NMR form

    H = sum_k Omega_k Z_k / 2 + pi * sum_{k<j} J_kj Z_k Z_j / 2

whose config carries frequencies in Hz. The builder applies the ``2*pi``
for offsets; the coupling term already carries its ``pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .pauli import (
    MAX_SPINS,
    PAULI_MATRICES,
    PauliError,
    PauliString,
    check_spin_count,
    embed,
    parse_label,
    to_matrix,
)

DEFAULT_LOCALITY = 2


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class LocalTerm:
    coeff: float  # rad/s
    pauli: PauliString


@dataclass(frozen=True)
class NMRParams:
    offsets_hz: tuple[float, ...]
    couplings_hz: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class SpinSystem:
    """Drift Hamiltonian data: exactly one of ``terms`` or ``nmr`` is set."""

    n: int
    terms: tuple[LocalTerm, ...] | None = None
    nmr: NMRParams | None = None
    locality: int = DEFAULT_LOCALITY

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n", f"spin count must be >= 1, got {self.n}")
        if (self.terms is None) == (self.nmr is None):
            raise ConfigError("$", "exactly one of 'terms' or 'nmr' must be given")
        if self.terms is not None:
            for i, t in enumerate(self.terms):
                if t.pauli.n != self.n:
                    raise ConfigError(f"terms[{i}].pauli", f"length {t.pauli.n} != n={self.n}")
                if t.pauli.weight > self.locality:
                    raise ConfigError(
                        f"terms[{i}].pauli",
                        f"weight {t.pauli.weight} exceeds locality bound {self.locality}",
                    )
        else:
            _check_nmr(self.nmr, self.n)

    @classmethod
    def from_terms(cls, n: int, terms: list[tuple[float, str]], locality: int = DEFAULT_LOCALITY) -> "SpinSystem":
        return cls(n, terms=tuple(LocalTerm(float(c), parse_label(p, n)) for c, p in terms), locality=locality)

    @classmethod
    def from_nmr(cls, offsets_hz, couplings_hz) -> "SpinSystem":
        offsets = tuple(float(v) for v in offsets_hz)
        couplings = tuple(tuple(float(v) for v in row) for row in couplings_hz)
        return cls(len(offsets), nmr=NMRParams(offsets, couplings))


def _check_nmr(nmr: NMRParams, n: int) -> None:
    if len(nmr.offsets_hz) != n:
        raise ConfigError("nmr.offsets_hz", f"expected {n} values, got {len(nmr.offsets_hz)}")
    if len(nmr.couplings_hz) != n or any(len(row) != n for row in nmr.couplings_hz):
        raise ConfigError("nmr.couplings_hz", f"expected {n}x{n} matrix")
    J = np.asarray(nmr.couplings_hz, dtype=float)
    if J.shape != (n, n):
        raise ConfigError("nmr.couplings_hz", f"expected {n}x{n} matrix, got shape {J.shape}")
    if not np.all(np.isfinite(J)) or not np.all(np.isfinite(nmr.offsets_hz)):
        raise ConfigError("nmr", "non-finite value")
    if np.any(np.abs(J - J.T) > 1e-12):
        k, j = np.argwhere(np.abs(J - J.T) > 1e-12)[0]
        raise ConfigError(f"nmr.couplings_hz[{k}][{j}]", "asymmetric couplings")
    if np.any(np.diag(J) != 0.0):
        raise ConfigError("nmr.couplings_hz", "diagonal must be zero")


def build_drift(sys: SpinSystem, cap: int = MAX_SPINS) -> NDArray[np.complex128]:
    check_spin_count(sys.n, cap)
    n = sys.n
    dim = 2**n
    if sys.terms is not None:
        H = np.zeros((dim, dim), dtype=complex)
        for t in sys.terms:
            if t.coeff != 0.0:
                H += t.coeff * to_matrix(t.pauli)
        return H
    # NMR drift is diagonal: work with the +-1 eigenvalues of each Z_k.
    signs = 1 - 2 * ((np.arange(dim)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    omega = 2 * np.pi * np.asarray(sys.nmr.offsets_hz)
    J = np.asarray(sys.nmr.couplings_hz)
    diag = signs @ omega / 2
    for k in range(n):
        for j in range(k + 1, n):
            if J[k, j] != 0.0:
                diag = diag + np.pi * J[k, j] * signs[:, k] * signs[:, j] / 2
    return np.diag(diag.astype(complex))


@dataclass(frozen=True)
class ControlGenerators:
    gx: NDArray[np.complex128] = field(repr=False)
    gy: NDArray[np.complex128] = field(repr=False)


def build_controls(n: int, cap: int = MAX_SPINS) -> ControlGenerators:
    """Collective drive generators ``sum_k X_k`` and ``sum_k Y_k``."""
    check_spin_count(n, cap)
    gx = sum(embed(PAULI_MATRICES["X"], k, n) for k in range(n))
    gy = sum(embed(PAULI_MATRICES["Y"], k, n) for k in range(n))
    return ControlGenerators(gx, gy)


def load_system(doc: dict[str, Any], cap: int = MAX_SPINS) -> SpinSystem:
    """Validate a system config dict (parsed JSON) into a :class:`SpinSystem`."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "system config must be a JSON object")
    if "n" not in doc:
        raise ConfigError("n", "missing required field")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError("n", f"must be a positive integer, got {n!r}")
    if n > cap:
        raise ConfigError("n", f"spin count {n} exceeds dimension cap {cap}")
    has_nmr, has_terms = "nmr" in doc, "terms" in doc
    if has_nmr == has_terms:
        raise ConfigError("$", "exactly one of 'nmr' or 'terms' must be given")
    locality = doc.get("locality", DEFAULT_LOCALITY)

    if has_terms:
        raw = doc["terms"]
        if not isinstance(raw, list):
            raise ConfigError("terms", "must be an array")
        terms = []
        for i, t in enumerate(raw):
            if not isinstance(t, dict):
                raise ConfigError(f"terms[{i}]", "must be an object")
            for key in ("coeff", "pauli"):
                if key not in t:
                    raise ConfigError(f"terms[{i}].{key}", "missing required field")
            try:
                coeff = float(t["coeff"])
            except (TypeError, ValueError):
                raise ConfigError(f"terms[{i}].coeff", f"not a number: {t['coeff']!r}") from None
            try:
                p = parse_label(str(t["pauli"]), n)
            except PauliError as exc:
                raise ConfigError(f"terms[{i}].pauli", str(exc)) from None
            terms.append(LocalTerm(coeff, p))
        return SpinSystem(n, terms=tuple(terms), locality=locality)

    nmr = doc["nmr"]
    if not isinstance(nmr, dict):
        raise ConfigError("nmr", "must be an object")
    offsets = nmr.get("offsets_hz", [0.0] * n)
    couplings = nmr.get("couplings_hz", [[0.0] * n for _ in range(n)])
    try:
        offsets = tuple(float(v) for v in offsets)
    except (TypeError, ValueError):
        raise ConfigError("nmr.offsets_hz", "must be an array of numbers") from None
    try:
        couplings = tuple(tuple(float(v) for v in row) for row in couplings)
    except (TypeError, ValueError):
        raise ConfigError("nmr.couplings_hz", "must be an array of number arrays") from None
    return SpinSystem(n, nmr=NMRParams(offsets, couplings))


def system_to_doc(sys: SpinSystem) -> dict[str, Any]:
    if sys.terms is not None:
        return {"n": sys.n, "terms": [{"coeff": t.coeff, "pauli": t.pauli.letters} for t in sys.terms]}
    return {
        "n": sys.n,
        "nmr": {"offsets_hz": list(sys.nmr.offsets_hz), "couplings_hz": [list(r) for r in sys.nmr.couplings_hz]},
    }
