"""Piecewise-constant propagation with forward/backward caching.

For a pulse of M slices the cache holds the forward states
``rho_m = U_1^m rho_i (U_1^m)^dag`` and the back-propagated targets
``lam_m = (U_{m+1}^M)^dag target U_{m+1}^M``. Every overlap
``<rho_m, lam_m>`` equals the final fitness, which is what lets the
gradient be evaluated with one pass in each direction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .spin import ConfigError, ControlGenerators, SpinSystem, build_controls, build_drift

Matrix = NDArray[np.complex128]


@dataclass(frozen=True)
class ControlPulse:
    """M slices of length ``tau`` seconds; ``amps[m] = (ux, uy)`` in rad/s."""

    tau: float
    amps: NDArray[np.float64] = field(repr=False)
    u_max: float | None = None

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=float)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] < 1:
            raise ConfigError("pulse", f"amplitudes must have shape (M, 2), got {amps.shape}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError("pulse.tau", f"must be positive and finite, got {self.tau!r}")
        if not np.all(np.isfinite(amps)):
            raise ConfigError("pulse", "non-finite amplitude")
        if self.u_max is not None:
            amps = np.clip(amps, -self.u_max, self.u_max)
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def M(self) -> int:
        return self.amps.shape[0]

    @property
    def duration(self) -> float:
        return self.M * self.tau

    def flat(self) -> NDArray[np.float64]:
        """Parameter vector ordered ``(ux[1..M], uy[1..M])``."""
        return np.concatenate([self.amps[:, 0], self.amps[:, 1]])

    @classmethod
    def from_flat(cls, vec, tau: float, u_max: float | None = None) -> "ControlPulse":
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size % 2:
            raise ConfigError("pulse", f"flat vector must have even length, got {vec.shape}")
        M = vec.size // 2
        return cls(tau, np.stack([vec[:M], vec[M:]], axis=1), u_max)

    @classmethod
    def zeros(cls, M: int, tau: float) -> "ControlPulse":
        return cls(tau, np.zeros((M, 2)))

    @classmethod
    def random(cls, M: int, tau: float, lo: float, hi: float, rng: np.random.Generator) -> "ControlPulse":
        return cls(tau, rng.uniform(lo, hi, size=(M, 2)))


def slice_propagator(H: Matrix, gens: ControlGenerators, ux: float, uy: float, tau: float) -> Matrix:
    """``exp(-i (H + ux gx + uy gy) tau)`` via Hermitian eigendecomposition."""
    if not (math.isfinite(ux) and math.isfinite(uy)):
        raise ConfigError("pulse", f"non-finite amplitude ({ux!r}, {uy!r})")
    if not tau > 0:
        raise ConfigError("pulse.tau", f"must be positive, got {tau!r}")
    A = H + ux * gens.gx + uy * gens.gy
    w, V = np.linalg.eigh(A)
    return (V * np.exp(-1j * tau * w)) @ V.conj().T


def conj(U: Matrix, rho: Matrix) -> Matrix:
    """``U rho U^dag``."""
    return U @ rho @ U.conj().T


def slice_unitaries(pulse: ControlPulse, H: Matrix, gens: ControlGenerators) -> list[Matrix]:
    return [slice_propagator(H, gens, ux, uy, pulse.tau) for ux, uy in pulse.amps]


def propagate(rho_i: Matrix, pulse: ControlPulse, sys: SpinSystem) -> Matrix:
    H = build_drift(sys)
    gens = build_controls(sys.n)
    if rho_i.shape != H.shape:
        raise ConfigError("rho_i", f"shape {rho_i.shape} does not match system dimension {H.shape}")
    rho = rho_i
    for U in slice_unitaries(pulse, H, gens):
        rho = conj(U, rho)
    return rho


def backward_sweep(unitaries: list[Matrix], target: Matrix) -> list[Matrix]:
    """``lam_m`` for m = 0..M with ``lam_M = target``."""
    lam = [target]
    for U in reversed(unitaries):
        lam.append(U.conj().T @ lam[-1] @ U)
    lam.reverse()
    return lam


@dataclass(frozen=True)
class PropagationCache:
    unitaries: list[Matrix] = field(repr=False)
    forward: list[Matrix] = field(repr=False)
    backward: list[Matrix] = field(repr=False)

    @property
    def final(self) -> Matrix:
        return self.forward[-1]


def forward_sweep(unitaries: list[Matrix], rho_i: Matrix) -> list[Matrix]:
    fwd = [rho_i]
    for U in unitaries:
        fwd.append(conj(U, fwd[-1]))
    return fwd


def build_cache(
    rho_i: Matrix,
    target: Matrix,
    pulse: ControlPulse,
    sys: SpinSystem,
    H: Matrix | None = None,
    gens: ControlGenerators | None = None,
) -> PropagationCache:
    H = build_drift(sys) if H is None else H
    gens = build_controls(sys.n) if gens is None else gens
    if rho_i.shape != H.shape or target.shape != H.shape:
        raise ConfigError("rho_i", f"state dimensions do not match system dimension {H.shape}")
    Us = slice_unitaries(pulse, H, gens)
    return PropagationCache(Us, forward_sweep(Us, rho_i), backward_sweep(Us, target))


def discretize_duration(t: float, tau: float) -> int:
    """Slice count ``Round(t / tau)`` with ties rounded away from zero.

    The quotient is first rounded to 12 significant digits so that
    durations which are exact multiples in decimal (16.36e-3 / 20e-6)
    are not pushed off a tie by binary representation error.
    """
    if t < 0 or not tau > 0:
        raise ValueError(f"need t >= 0 and tau > 0, got t={t!r}, tau={tau!r}")
    q = float(f"{t / tau:.12g}")
    return int(math.floor(q + 0.5))


# -- pulse files ------------------------------------------------------------


def write_pulse(path: str | Path, pulse: ControlPulse) -> None:
    """CSV ``m,ux,uy`` (1-based m) plus a JSON sidecar ``{"tau_s", "M"}``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "ux", "uy"])
        for m, (ux, uy) in enumerate(pulse.amps, start=1):
            w.writerow([m, repr(float(ux)), repr(float(uy))])
    sidecar_path(path).write_text(json.dumps({"tau_s": pulse.tau, "M": pulse.M}) + "\n")


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def read_pulse(path: str | Path, tau: float | None = None, M: int | None = None) -> ControlPulse:
    """Read a pulse CSV; ``tau``/``M`` come from the sidecar unless given."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "pulse file not found")
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        tau = meta.get("tau_s") if tau is None else tau
        M = meta.get("M") if M is None else M
    if tau is None:
        raise ConfigError("tau_s", f"no sidecar {side.name} and no --tau given")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["m", "ux", "uy"]:
            raise ConfigError(str(path), "header must be 'm,ux,uy'")
        for i, row in enumerate(reader):
            try:
                m = int(row["m"])
                rows.append((m, float(row["ux"]), float(row["uy"])))
            except (TypeError, ValueError):
                raise ConfigError(f"{path}:row {i + 2}", "malformed row") from None
    if [r[0] for r in rows] != list(range(1, len(rows) + 1)):
        raise ConfigError(str(path), "slice indices must run 1..M in order")
    if M is not None and M != len(rows):
        raise ConfigError(str(path), f"expected M={M} slices, found {len(rows)}")
    return ControlPulse(float(tau), np.array([[ux, uy] for _, ux, uy in rows]))
