"""Spectral gaps of a truncation and the gap-activated coupling matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..basis import OperatorSet
from ..lie import gap_mask, spectral_gap_values

GAP_ATOL = 1e-12


@dataclass(frozen=True)
class SpectralGapSet:
    N: int
    gaps: tuple[float, ...]
    pair_table: dict[float, tuple[tuple[int, int], ...]] = field(repr=False)

    def find(self, sigma: float) -> float:
        """The stored gap equal to ``sigma`` (within 1e-12)."""
        for g in self.gaps:
            if abs(g - sigma) <= GAP_ATOL:
                return g
        raise ValueError(f"sigma={sigma} is not a spectral gap of the {self.N}-level truncation")

    def __contains__(self, sigma: object) -> bool:
        try:
            self.find(float(sigma))  # type: ignore[arg-type]
        except (TypeError, ValueError):
            return False
        return True

    def __len__(self) -> int:
        return len(self.gaps)


def spectral_gaps(ops: OperatorSet, N: int | None = None) -> SpectralGapSet:
    """Distinct positive ``|lam_j - lam_k|`` among the first ``N`` levels with their pairs (0-based, j < k)."""
    N = ops.dim if N is None else N
    if not 1 <= N <= ops.dim:
        raise ValueError(f"N={N} outside 1..{ops.dim}")
    lam = np.asarray(ops.eigenvalues[:N])
    gaps = tuple(spectral_gap_values(lam, GAP_ATOL))
    table = {}
    for g in gaps:
        mask = np.triu(gap_mask(lam, g, GAP_ATOL), k=1)
        table[g] = tuple((int(j), int(k)) for j, k in zip(*np.nonzero(mask)))
    return SpectralGapSet(N, gaps, table)


@dataclass(frozen=True, eq=False)
class GapGenerator:
    """``v.B`` restricted to level pairs separated by exactly ``sigma``.

    ``matrix`` is that masked matrix.  ``xi`` is the phase carried by the
    averaged dynamics: entries with ``lam_k - lam_j = +sigma`` are multiplied
    by ``xi`` and those with ``-sigma`` by ``conj(xi)`` (see :meth:`effective`).
    """

    sigma: float
    v: tuple[float, float, float]
    matrix: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    xi: complex = 1.0

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def up_part(self) -> np.ndarray:
        lam = self.eigenvalues
        return self.matrix * (np.abs((lam[None, :] - lam[:, None]) - self.sigma) <= GAP_ATOL)

    @property
    def down_part(self) -> np.ndarray:
        return self.matrix - self.up_part

    def with_phase(self, xi: complex) -> "GapGenerator":
        return GapGenerator(self.sigma, self.v, self.matrix, self.eigenvalues, complex(xi))

    @property
    def effective(self) -> np.ndarray:
        return self.xi * self.up_part + np.conj(self.xi) * self.down_part

    def block(self, n: int) -> np.ndarray:
        return self.effective[:n, :n]


def gap_generator(ops: OperatorSet, sigma: float, v, N: int | None = None, xi: complex = 1.0) -> GapGenerator:
    N = ops.dim if N is None else N
    gaps = spectral_gaps(ops, N)
    sigma = gaps.find(sigma)
    v = tuple(float(x) for x in v)
    if len(v) != 3 or any(x < 0 or x > 1 for x in v):
        raise ValueError("v must be a 3-vector in [0, 1]^3")
    lam = np.array(ops.eigenvalues[:N])
    mat = ops.control_operator(v)[:N, :N] * gap_mask(lam, sigma, GAP_ATOL)
    mat.setflags(write=False)
    lam.setflags(write=False)
    return GapGenerator(sigma, v, mat, lam, complex(xi))
