"""Orientation, fidelity and shell populations of rotor states."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .basis import LevelIndex, OperatorSet, cos_theta_matrix
from .propagation import StateVector


def _amps(psi) -> np.ndarray:
    return np.asarray(psi.amplitudes if isinstance(psi, StateVector) else psi, dtype=complex)


def orientation(ops: OperatorSet, psi) -> float:
    """``<psi| cos(theta) |psi>`` on the truncation of ``ops``."""
    a = _amps(psi)
    if a.shape != (ops.dim,):
        raise ValueError(f"state has {a.size} amplitudes, operators act on {ops.dim}")
    return float(np.real(np.vdot(a, cos_theta_matrix(ops) @ a)))


def max_orientation(ops: OperatorSet) -> float:
    """Largest eigenvalue of the truncated ``cos(theta)``, the best orientation this truncation allows."""
    return float(np.linalg.eigvalsh(cos_theta_matrix(ops))[-1])


def fidelity(psi_a, psi_b) -> float:
    """``|<psi_a, psi_b>|``."""
    a, b = _amps(psi_a), _amps(psi_b)
    if a.shape != b.shape:
        raise ValueError("states have different dimensions")
    return float(min(1.0, abs(np.vdot(a, b))))


def phase_distance(psi_a, psi_b) -> float:
    """``min_phi ||psi_a - exp(i phi) psi_b|| = sqrt(2 (1 - fidelity))``."""
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - fidelity(psi_a, psi_b)))))


def level_populations(psi: StateVector) -> dict[LevelIndex, float]:
    p = np.abs(psi.amplitudes) ** 2
    return {lv: float(x) for lv, x in zip(psi.ordering.levels, p)}


def shell_populations(psi: StateVector) -> dict[int, float]:
    """Population of each shell ``ell`` present in the truncation."""
    out: dict[int, float] = defaultdict(float)
    for lv, x in level_populations(psi).items():
        out[lv.ell] += x
    return dict(out)


@dataclass(frozen=True)
class ObservableReport:
    orientation: float
    fidelity: float
    populations: dict[LevelIndex, float]
    max_orientation: float | None = None

    def __post_init__(self) -> None:
        if abs(sum(self.populations.values()) - 1.0) > 1e-10:
            raise ValueError("populations do not sum to one")
        if abs(self.orientation) > 1 + 1e-12:
            raise ValueError("orientation outside [-1, 1]")

    @classmethod
    def of(cls, ops: OperatorSet, psi: StateVector, target: StateVector | None = None) -> "ObservableReport":
        fid = fidelity(psi, target) if target is not None else float("nan")
        return cls(orientation(ops, psi), fid, level_populations(psi), max_orientation(ops))

    @property
    def shells(self) -> dict[int, float]:
        out: dict[int, float] = defaultdict(float)
        for lv, x in self.populations.items():
            out[lv.ell] += x
        return dict(out)

    def to_dict(self) -> dict:
        out = {
            "fidelity": self.fidelity,
            "orientation": self.orientation,
            "populations": {f"{lv.ell},{lv.m}": x for lv, x in self.populations.items()},
        }
        if self.max_orientation is not None:
            out["max_orientation"] = self.max_orientation
        return out
