"""Propagation of the truncated rotor under piecewise-constant fields.

Each constant piece is integrated exactly: the skew-Hermitian generator ``G``
is diagonalised through the Hermitian matrix ``iG`` and exponentiated
spectrally.  Pieces with zero field only rotate phases (the drift is
diagonal) and skip the eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .basis import BasisOrdering, OperatorSet

NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StateVector:
    ordering: BasisOrdering
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.ordering.dim,):
            raise ValueError(f"expected {self.ordering.dim} amplitudes, got shape {amps.shape}")
        if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalised (norm {np.linalg.norm(amps):.12f})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis_state(cls, ordering: BasisOrdering, ell: int, m: int) -> "StateVector":
        amps = np.zeros(ordering.dim, dtype=complex)
        amps[ordering.index_of((ell, m))] = 1.0
        return cls(ordering, amps)

    @classmethod
    def from_levels(cls, ordering: BasisOrdering, coeffs: dict, normalize: bool = True) -> "StateVector":
        """Build from ``{(ell, m): amplitude}``."""
        amps = np.zeros(ordering.dim, dtype=complex)
        for level, c in coeffs.items():
            amps[ordering.index_of(tuple(level))] = c
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(ordering, amps)

    def embed(self, ordering: BasisOrdering) -> "StateVector":
        """Same state in a larger (or equal) shell-major truncation."""
        if ordering.ell_min != self.ordering.ell_min or ordering.dim < self.ordering.dim:
            raise ValueError("can only embed into a larger truncation with the same lowest shell")
        amps = np.zeros(ordering.dim, dtype=complex)
        amps[: self.ordering.dim] = self.amplitudes
        return StateVector(ordering, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(eq=False)
class PiecewiseControl:
    """Schedule of ``(duration, u1, u2, u3)`` pieces with amplitude bound(s).

    ``bound`` is either one number or one per axis.
    """

    pieces: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    bound: float | tuple[float, float, float] = np.inf

    def __post_init__(self) -> None:
        self.pieces = np.asarray(self.pieces, dtype=float).reshape(-1, 4)
        if not np.all(np.isfinite(self.pieces)):
            raise ValueError("control schedule contains non-finite values")
        if np.any(self.pieces[:, 0] <= 0):
            raise ValueError("every piece needs a positive duration")
        bounds = np.broadcast_to(np.asarray(self.bound, dtype=float), (3,))
        if np.any(bounds <= 0):
            raise ValueError("bounds must be positive")
        excess = np.abs(self.pieces[:, 1:]) - bounds
        if excess.size and excess.max() > 1e-12 * max(1.0, float(np.max(bounds[np.isfinite(bounds)], initial=1.0))):
            raise ValueError(f"control exceeds its bound by {excess.max():.3e}")

    @property
    def durations(self) -> np.ndarray:
        return self.pieces[:, 0]

    @property
    def amplitudes(self) -> np.ndarray:
        return self.pieces[:, 1:]

    @property
    def total_time(self) -> float:
        return float(self.pieces[:, 0].sum())

    @property
    def sup_amplitude(self) -> float:
        return float(np.abs(self.amplitudes).max()) if len(self.pieces) else 0.0

    def __len__(self) -> int:
        return len(self.pieces)

    def concat(self, other: "PiecewiseControl") -> "PiecewiseControl":
        bound = self.bound if np.all(np.asarray(self.bound) == np.asarray(other.bound)) else np.maximum(self.bound, other.bound)
        return PiecewiseControl(np.vstack([self.pieces, other.pieces]), bound)

    def to_dict(self) -> dict:
        bound = self.bound if np.ndim(self.bound) == 0 else list(self.bound)
        return {"bound": bound, "pieces": self.pieces.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "PiecewiseControl":
        bound = payload.get("bound", np.inf)
        bound = tuple(bound) if isinstance(bound, list) else float(bound)
        return cls(np.asarray(payload["pieces"], dtype=float).reshape(-1, 4), bound)


@dataclass(eq=False)
class ReparametrizedControl:
    """Pieces ``(duration, z, v1, v2, v3)`` of the drift-rescaled system.

    The drift speed ``z`` stays at or above ``1/bound`` and ``v`` in [0, 1].
    """

    pieces: np.ndarray
    bound: float

    def __post_init__(self) -> None:
        self.pieces = np.asarray(self.pieces, dtype=float).reshape(-1, 5)
        if np.any(self.pieces[:, 0] <= 0):
            raise ValueError("every piece needs a positive duration")
        if np.any(self.pieces[:, 1] < 1.0 / self.bound * (1 - 1e-12)):
            raise ValueError("drift speed z below 1/bound")
        v = self.pieces[:, 2:]
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("v must lie in [0, 1]")

    @property
    def total_time(self) -> float:
        return float(self.pieces[:, 0].sum())


def reparametrize(ctrl_rep: ReparametrizedControl) -> PiecewiseControl:
    """Lab-frame schedule: ``u = v / z`` held for ``duration * z``."""
    s = ctrl_rep.pieces
    if np.any(s[:, 1] < 1.0 / ctrl_rep.bound * (1 - 1e-12)):
        raise ValueError("drift speed z below 1/bound")
    lab = np.column_stack([s[:, 0] * s[:, 1], s[:, 2:] / s[:, 1:2]])
    return PiecewiseControl(lab, ctrl_rep.bound)


class _ExpCache:
    """Spectral exponentials of ``A + u.B`` reused across identical pieces."""

    def __init__(self, ops: OperatorSet) -> None:
        self.ops = ops
        self.lam = np.asarray(ops.eigenvalues)
        self._eig: dict[tuple[float, float, float], tuple[np.ndarray, np.ndarray]] = {}

    def eig(self, u: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        key = tuple(float(x) for x in u)
        if key not in self._eig:
            H = 1j * self.ops.generator(key)  # Hermitian
            w, V = np.linalg.eigh(H)
            self._eig[key] = (w, V)
        return self._eig[key]

    def is_free(self, u: Sequence[float]) -> bool:
        return not np.any(u)

    def apply(self, tau: float, u: Sequence[float], psi: np.ndarray) -> np.ndarray:
        """``exp(tau (A + u.B)) psi`` for a vector or a matrix of columns."""
        if self.is_free(u):
            phase = np.exp(1j * self.lam * tau)
            return phase[:, None] * psi if psi.ndim == 2 else phase * psi
        w, V = self.eig(u)
        ph = np.exp(-1j * w * tau)
        if psi.ndim == 2:
            return V @ (ph[:, None] * (V.conj().T @ psi))
        return V @ (ph * (V.conj().T @ psi))

    def matrix(self, tau: float, u: Sequence[float]) -> np.ndarray:
        if self.is_free(u):
            return np.diag(np.exp(1j * self.lam * tau))
        w, V = self.eig(u)
        return (V * np.exp(-1j * w * tau)) @ V.conj().T


def expm_skew(G: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(t G)`` for skew-Hermitian ``G`` through ``eigh(iG)``."""
    w, V = np.linalg.eigh(1j * np.asarray(G))
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def _check(ops: OperatorSet, ctrl: PiecewiseControl) -> None:
    if not np.all(np.isfinite(ctrl.pieces)):
        raise ValueError("non-finite control values")


def propagate(ops: OperatorSet, psi0: StateVector, ctrl: PiecewiseControl) -> StateVector:
    """Final state after the whole schedule."""
    if psi0.ordering.dim != ops.dim:
        raise ValueError(f"state has dimension {psi0.ordering.dim}, operators {ops.dim}")
    _check(ops, ctrl)
    cache = _ExpCache(ops)
    psi = np.array(psi0.amplitudes)
    for tau, *u in ctrl.pieces:
        psi = cache.apply(tau, u, psi)
    return StateVector(ops.ordering, psi)


def propagator_matrix(ops: OperatorSet, ctrl: PiecewiseControl) -> np.ndarray:
    """Full propagator of the schedule (later pieces multiply on the left)."""
    _check(ops, ctrl)
    cache = _ExpCache(ops)
    U = np.eye(ops.dim, dtype=complex)
    for tau, *u in ctrl.pieces:
        U = cache.apply(tau, u, U)
    return U


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def interaction_generator(ops: OperatorSet, omega: float, v) -> np.ndarray:
    """``exp(-omega A) (v.B) exp(omega A)``; entry (j,k) picks up ``exp(i(lam_k - lam_j) omega)``."""
    lam = np.asarray(ops.eigenvalues)
    phase = np.exp(1j * (lam[None, :] - lam[:, None]) * omega)
    return phase * ops.control_operator(v)


def to_interaction_frame(ops: OperatorSet, psi: np.ndarray, omega: float) -> np.ndarray:
    return np.exp(-1j * np.asarray(ops.eigenvalues) * omega) * psi


def from_interaction_frame(ops: OperatorSet, y: np.ndarray, omega: float) -> np.ndarray:
    return np.exp(1j * np.asarray(ops.eigenvalues) * omega) * y


def sample_trajectory(
    ops: OperatorSet, psi0: StateVector, ctrl: PiecewiseControl, times: Iterable[float]
) -> np.ndarray:
    """States at the requested (sorted) lab times, shape ``(len(times), dim)``."""
    times = np.asarray(list(times), dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("sample times must be sorted")
    cache = _ExpCache(ops)
    out = np.empty((len(times), ops.dim), dtype=complex)
    psi = np.array(psi0.amplitudes)
    t_start = 0.0
    i = 0
    for tau, *u in ctrl.pieces:
        t_end = t_start + tau
        while i < len(times) and times[i] <= t_end:
            out[i] = cache.apply(times[i] - t_start, u, psi)
            i += 1
        psi = cache.apply(tau, u, psi)
        t_start = t_end
    while i < len(times):
        out[i] = cache.apply(times[i] - t_start, (0.0, 0.0, 0.0), psi)
        i += 1
    return out


def leakage(ops_small: OperatorSet, ops_large: OperatorSet, psi0: StateVector, ctrl: PiecewiseControl) -> float:
    """Population leaving the small truncation when evolved in the large one."""
    if ops_small.ell_max >= ops_large.ell_max:
        raise ValueError("the large truncation must have more shells")
    n = ops_small.dim
    amps = np.asarray(psi0.amplitudes)
    if len(amps) > n and np.any(np.abs(amps[n:]) > 0):
        raise ValueError("initial state has support outside the small truncation")
    psi_large = propagate(ops_large, StateVector(ops_large.ordering, np.concatenate([amps[:n], np.zeros(ops_large.dim - n)])), ctrl)
    kept = np.linalg.norm(psi_large.amplitudes[:n]) ** 2
    return float(max(0.0, 1.0 - kept))
