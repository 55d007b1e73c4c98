"""Pauli strings, sparse Pauli-basis states and Hilbert-Schmidt overlaps.

Labels read left to right as spin 1..n; internally spins are 0-indexed.
All overlaps use the normalisation ``Tr(a b) / 2**n`` so that the Pauli
strings form an orthonormal basis and deviation density matrices are
handled without any positivity requirement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import NDArray

MAX_SPINS = 12
HERMITIAN_ATOL = 1e-12

ALPHABET = "IXYZ"

PAULI_MATRICES: dict[str, NDArray[np.complex128]] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliError(ValueError):
    """Raised for malformed Pauli labels or sparse states."""


def check_spin_count(n: int, cap: int = MAX_SPINS) -> None:
    if n < 1:
        raise PauliError(f"spin count must be >= 1, got {n}")
    if n > cap:
        raise PauliError(f"spin count {n} exceeds dimension cap {cap}")


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli basis operator, e.g. ``PauliString("ZIZ")``."""

    letters: str

    def __post_init__(self) -> None:
        for i, c in enumerate(self.letters):
            if c not in ALPHABET:
                raise PauliError(f"illegal character {c!r} at index {i}")
        if not self.letters:
            raise PauliError("empty Pauli label")

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    def __str__(self) -> str:
        return self.letters


def parse_label(text: str, n: int) -> PauliString:
    """Parse a case-insensitive label of length ``n`` over ``IXYZ``."""
    label = text.strip().upper()
    if len(label) != n:
        raise PauliError(f"label {text!r} has length {len(label)}, expected {n}")
    for i, c in enumerate(label):
        if c not in ALPHABET:
            raise PauliError(f"illegal character {text.strip()[i]!r} at index {i}")
    return PauliString(label)


def single_site(letter: str, k: int, n: int) -> PauliString:
    """Pauli string with ``letter`` on 0-based spin ``k`` and identity elsewhere."""
    if not 0 <= k < n:
        raise PauliError(f"spin index {k} out of range for n={n}")
    return PauliString("I" * k + letter + "I" * (n - k - 1))


def to_matrix(p: PauliString, cap: int = MAX_SPINS) -> NDArray[np.complex128]:
    """Dense Kronecker product of the single-spin Pauli matrices in label order."""
    check_spin_count(p.n, cap)
    return reduce(np.kron, (PAULI_MATRICES[c] for c in p.letters))


def embed(op: NDArray[np.complex128], k: int, n: int) -> NDArray[np.complex128]:
    """Embed a 2x2 operator on 0-based spin ``k`` of an n-spin register."""
    if not 0 <= k < n:
        raise PauliError(f"spin index {k} out of range for n={n}")
    left = np.eye(2**k, dtype=complex)
    right = np.eye(2 ** (n - k - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def is_hermitian(a: NDArray, atol: float = HERMITIAN_ATOL) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.all(np.abs(a - a.conj().T) <= atol))


def as_hermitian(a: NDArray, atol: float = HERMITIAN_ATOL) -> NDArray[np.complex128]:
    """Validate ``a`` as a square Hermitian matrix of dimension ``2**n``."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PauliError(f"expected a square matrix, got shape {a.shape}")
    dim = a.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise PauliError(f"dimension {dim} is not a power of two")
    if not is_hermitian(a, atol):
        raise PauliError("matrix is not Hermitian")
    return a


def hs_inner(a: NDArray, b: NDArray, atol: float = 1e-12) -> float:
    """Normalised Hilbert-Schmidt overlap ``Tr(a b) / dim`` of two Hermitian matrices.

    Computed as an elementwise sum so no matrix product is formed.
    """
    if a.shape != b.shape:
        raise PauliError(f"dimension mismatch: {a.shape} vs {b.shape}")
    dim = a.shape[0]
    val = np.sum(a * b.T) / dim
    scale = max(1.0, float(np.abs(a).max(initial=0.0)) * float(np.abs(b).max(initial=0.0)))
    if abs(val.imag) > atol * scale:
        raise PauliError(f"overlap has imaginary part {val.imag:.3e}; inputs not Hermitian")
    return float(val.real)


def expectation(rho: NDArray, p: PauliString) -> float:
    """``Tr(rho P) / 2**n`` for a Pauli string ``P``."""
    return hs_inner(rho, to_matrix(p))


@dataclass(frozen=True)
class SparsePauliState:
    """Operator ``sum_s x_s P_s`` stored as a map from label to real coefficient."""

    terms: Mapping[PauliString, float]
    n: int

    def __post_init__(self) -> None:
        if not self.terms:
            raise PauliError("sparse state needs at least one term")
        for p, x in self.terms.items():
            if p.n != self.n:
                raise PauliError(f"term {p} has length {p.n}, expected {self.n}")
            if x == 0.0 or not np.isfinite(x):
                raise PauliError(f"term {p} has invalid coefficient {x!r}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]], n: int | None = None) -> "SparsePauliState":
        terms: dict[PauliString, float] = {}
        pairs = list(pairs)
        if not pairs:
            raise PauliError("sparse state needs at least one term")
        if n is None:
            n = len(pairs[0][0].strip())
        for label, x in pairs:
            p = parse_label(label, n)
            terms[p] = terms.get(p, 0.0) + float(x)
        terms = {p: x for p, x in terms.items() if x != 0.0}
        return cls(terms, n)

    @property
    def size(self) -> int:
        return len(self.terms)

    def items(self) -> list[tuple[PauliString, float]]:
        """Terms in a stable order (sorted by label)."""
        return sorted(self.terms.items(), key=lambda t: t[0].letters)

    def scaled(self, c: float) -> "SparsePauliState":
        return SparsePauliState({p: c * x for p, x in self.terms.items()}, self.n)

    def to_matrix(self) -> NDArray[np.complex128]:
        return sum(x * to_matrix(p) for p, x in self.items())

    def to_json(self) -> str:
        return json.dumps([{"label": p.letters, "coeff": x} for p, x in self.items()])

    @classmethod
    def from_json(cls, doc: str | list) -> "SparsePauliState":
        data = json.loads(doc) if isinstance(doc, str) else doc
        if not isinstance(data, list):
            raise PauliError("sparse state JSON must be an array of {label, coeff}")
        pairs = []
        for i, entry in enumerate(data):
            try:
                pairs.append((str(entry["label"]), float(entry["coeff"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise PauliError(f"[{i}]: expected {{'label': str, 'coeff': number}}") from exc
        return cls.from_pairs(pairs)

    @classmethod
    def parse_inline(cls, text: str) -> "SparsePauliState":
        """Parse ``"ZZI:1.0,IXX:-0.5"``; a bare label means coefficient 1."""
        pairs = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            label, _, coeff = chunk.partition(":")
            try:
                pairs.append((label, float(coeff) if coeff else 1.0))
            except ValueError as exc:
                raise PauliError(f"bad coefficient in {chunk!r}") from exc
        return cls.from_pairs(pairs)
