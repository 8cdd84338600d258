"""Spherical-harmonic index space and truncated rotor operators.

The rigid linear rotor is represented in the basis of spherical harmonics
Y_l^m, ordered shell-major (all of shell l before shell l+1) with m ascending
inside a shell.  In this basis

* the drift ``A = i * Laplacian`` is diagonal with entries ``-i l(l+1)``;
* the three dipole couplings ``B1, B2, B3`` (the fields along x, y and z)
  are real combinations of the elementary skew-Hermitian matrices ``E`` and
  ``F`` linking neighbouring shells.

Indices are 0-based inside Python.  The JSON export uses 1-based indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

ComplexMatrix = NDArray[np.complex128]


@dataclass(frozen=True, order=True)
class LevelIndex:
    """Spherical-harmonic label ``(ell, m)`` with ``|m| <= ell``."""

    ell: int
    m: int

    def __post_init__(self) -> None:
        if self.ell < 0 or abs(self.m) > self.ell:
            raise ValueError(f"invalid level (ell={self.ell}, m={self.m})")

    def __str__(self) -> str:
        return f"{self.ell},{self.m}"


@dataclass(frozen=True)
class BasisOrdering:
    """Shell-major ordering of the levels with ``ell_min <= ell <= ell_max``.

    With the default ``ell_min = 0`` the dimension is ``(ell_max + 1)**2`` and
    the first ``(L + 1)**2`` states span shells ``0..L``, so Galerkin
    projections are leading blocks.
    """

    ell_max: int
    ell_min: int = 0

    def __post_init__(self) -> None:
        if self.ell_min < 0 or self.ell_max < self.ell_min:
            raise ValueError("need 0 <= ell_min <= ell_max")

    @property
    def dim(self) -> int:
        return (self.ell_max + 1) ** 2 - self.ell_min**2

    @cached_property
    def levels(self) -> tuple[LevelIndex, ...]:
        return tuple(
            LevelIndex(ell, m)
            for ell in range(self.ell_min, self.ell_max + 1)
            for m in range(-ell, ell + 1)
        )

    @cached_property
    def _positions(self) -> dict[LevelIndex, int]:
        return {level: k for k, level in enumerate(self.levels)}

    def index_of(self, level: LevelIndex | tuple[int, int]) -> int:
        if not isinstance(level, LevelIndex):
            level = LevelIndex(*level)
        try:
            return self._positions[level]
        except KeyError:
            raise KeyError(f"level {level} outside shells {self.ell_min}..{self.ell_max}") from None

    def level_of(self, index: int) -> LevelIndex:
        if not 0 <= index < self.dim:
            raise IndexError(f"index {index} outside 0..{self.dim - 1}")
        return self.levels[index]

    def shell_slice(self, ell: int) -> slice:
        start = self.index_of((ell, -ell))
        return slice(start, start + 2 * ell + 1)

    def __iter__(self) -> Iterator[LevelIndex]:
        return iter(self.levels)

    def __len__(self) -> int:
        return self.dim


def p_coeff(ell: int, m: int) -> float:
    """Coupling weight of ``(ell, m) <-> (ell+1, m)`` in ``B3`` (always negative)."""
    if ell < 0 or abs(m) > ell:
        raise ValueError(f"p_coeff needs |m| <= ell, got ell={ell}, m={m}")
    return -math.sqrt(((ell + 1) ** 2 - m**2) / ((2 * ell + 1) * (2 * ell + 3)))


def q_coeff(ell: int, m: int) -> float:
    """Coupling weight used by ``B1`` and ``B2``; the formula is evaluated as written."""
    radicand = (ell - m + 2) * (ell - m + 1) / (4 * (2 * ell + 1) * (2 * ell + 3))
    if radicand < 0:
        raise ValueError(f"q_coeff radicand negative for ell={ell}, m={m}")
    return math.sqrt(radicand)


def unit_matrix(j: int, k: int, dim: int) -> ComplexMatrix:
    e = np.zeros((dim, dim), dtype=complex)
    e[j, k] = 1.0
    return e


def E(j: int, k: int, dim: int) -> ComplexMatrix:
    return unit_matrix(j, k, dim) - unit_matrix(k, j, dim)


def F(j: int, k: int, dim: int) -> ComplexMatrix:
    return 1j * unit_matrix(j, k, dim) + 1j * unit_matrix(k, j, dim)


def D(j: int, k: int, dim: int) -> ComplexMatrix:
    return 1j * unit_matrix(j, j, dim) - 1j * unit_matrix(k, k, dim)


_KINDS = {"E": E, "F": F, "D": D}


@dataclass(frozen=True)
class ElementaryMatrix:
    """One of the elementary generators ``E``, ``F`` or ``D`` between two levels."""

    kind: str
    row: LevelIndex
    col: LevelIndex
    dim: int

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of E, F, D, got {self.kind!r}")
        if self.row == self.col:
            raise ValueError("elementary matrices need two distinct levels")

    def to_array(self, ordering: BasisOrdering) -> ComplexMatrix:
        if ordering.dim != self.dim:
            raise ValueError("ordering dimension does not match")
        j, k = ordering.index_of(self.row), ordering.index_of(self.col)
        return _KINDS[self.kind](j, k, self.dim)

    @property
    def label(self) -> str:
        return f"{self.kind}[({self.row}),({self.col})]"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Truncated drift and dipole couplings.

    ``drift = diag(1j * eigenvalues)`` with ``eigenvalues[k] = -l(l+1)``.
    The arrays are read-only.
    """

    ordering: BasisOrdering
    drift: ComplexMatrix
    couplings: tuple[ComplexMatrix, ComplexMatrix, ComplexMatrix]
    eigenvalues: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return self.ordering.dim

    @property
    def ell_max(self) -> int:
        return self.ordering.ell_max

    @property
    def B1(self) -> ComplexMatrix:
        return self.couplings[0]

    @property
    def B2(self) -> ComplexMatrix:
        return self.couplings[1]

    @property
    def B3(self) -> ComplexMatrix:
        return self.couplings[2]

    def control_operator(self, u) -> ComplexMatrix:
        """``u1 B1 + u2 B2 + u3 B3``."""
        u = np.asarray(u, dtype=float)
        return u[0] * self.B1 + u[1] * self.B2 + u[2] * self.B3

    def generator(self, u) -> ComplexMatrix:
        """Lab-frame generator ``A + sum_l u_l B_l``."""
        return self.drift + self.control_operator(u)

    def leading_block(self, n: int) -> ComplexMatrix:
        """Leading ``n x n`` block of each of ``(A, B1, B2, B3)`` stacked."""
        if not 1 <= n <= self.dim:
            raise ValueError(f"block size {n} outside 1..{self.dim}")
        return np.stack([self.drift[:n, :n], *(b[:n, :n] for b in self.couplings)])


def build_operators(ell_max: int, ell_min: int = 0) -> OperatorSet:
    """Assemble ``A, B1, B2, B3`` on shells ``ell_min..ell_max``.

    The two-shell block of the controllability argument for shell ``l`` is
    ``build_operators(l + 1, ell_min=l)`` (dimension ``4l + 4``).
    """
    if ell_max < 1 or ell_max <= ell_min:
        raise ValueError("need at least two shells (ell_max >= 1 and ell_max > ell_min)")
    ordering = BasisOrdering(ell_max, ell_min)
    n = ordering.dim
    idx = ordering.index_of
    b1 = np.zeros((n, n), dtype=complex)
    b2 = np.zeros((n, n), dtype=complex)
    b3 = np.zeros((n, n), dtype=complex)
    for ell in range(ell_min, ell_max):
        for m in range(-ell, ell + 1):
            j = idx((ell, m))
            b3 += p_coeff(ell, m) * F(j, idx((ell + 1, m)), n)
            down, up = idx((ell + 1, m - 1)), idx((ell + 1, m + 1))
            b1 += -q_coeff(ell, m) * F(j, down, n) + q_coeff(ell, -m) * F(j, up, n)
            b2 += q_coeff(ell, m) * E(j, down, n) + q_coeff(ell, -m) * E(j, up, n)
    lam = np.array([-lv.ell * (lv.ell + 1) for lv in ordering.levels], dtype=float)
    return OperatorSet(
        ordering=ordering,
        drift=_frozen(np.diag(1j * lam)),
        couplings=(_frozen(b1), _frozen(b2), _frozen(b3)),
        eigenvalues=_frozen(lam),
    )


def two_shell_block(ell: int) -> OperatorSet:
    """Operators restricted to shells ``ell`` and ``ell + 1``."""
    return build_operators(ell + 1, ell_min=ell)


def traceless_drift(ops: OperatorSet, n: int | None = None) -> ComplexMatrix:
    """Leading ``n x n`` drift block with its trace average removed."""
    n = ops.dim if n is None else n
    if not 1 <= n <= ops.dim:
        raise ValueError(f"block size {n} outside 1..{ops.dim}")
    block = ops.drift[:n, :n]
    return block - (np.trace(block) / n) * np.eye(n)


def cos_theta_matrix(ops: OperatorSet) -> ComplexMatrix:
    """Hermitian matrix of cos(theta); ``B3`` represents ``-i cos(theta)``."""
    return 1j * ops.B3


def _triplets(mat: np.ndarray) -> list[list]:
    rows, cols = np.nonzero(mat)
    order = np.lexsort((cols, rows))
    return [
        [int(rows[i]) + 1, int(cols[i]) + 1, float(mat[rows[i], cols[i]].real), float(mat[rows[i], cols[i]].imag)]
        for i in order
    ]


def operators_to_dict(ops: OperatorSet) -> dict:
    """JSON-ready export with sparse 1-based ``[row, col, re, im]`` triplets."""
    return {
        "ell_max": ops.ell_max,
        "dim": ops.dim,
        "lambda": [float(x) for x in ops.eigenvalues],
        "B1": _triplets(ops.B1),
        "B2": _triplets(ops.B2),
        "B3": _triplets(ops.B3),
    }


def operators_from_dict(payload: dict) -> OperatorSet:
    ell_max = int(payload["ell_max"])
    ops = build_operators(ell_max)
    if int(payload["dim"]) != ops.dim:
        raise ValueError("dim inconsistent with ell_max")
    mats = []
    for key in ("B1", "B2", "B3"):
        mat = np.zeros((ops.dim, ops.dim), dtype=complex)
        for row, col, re, im in payload[key]:
            mat[row - 1, col - 1] = re + 1j * im
        mats.append(_frozen(mat))
    lam = np.asarray(payload["lambda"], dtype=float)
    return OperatorSet(ops.ordering, _frozen(np.diag(1j * lam)), tuple(mats), _frozen(lam))
