"""Lie brackets, numerical Lie closures and the bracket identities of the rotor.

Skew-Hermitian matrices are handled as real vectors ``[Re X, Im X]`` so that
the real inner product ``Re tr(X^dagger Y)`` becomes an ordinary dot product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import (
    BasisOrdering,
    D,
    E,
    F,
    OperatorSet,
    build_operators,
    p_coeff,
    q_coeff,
    traceless_drift,
    two_shell_block,
)

SKEW_TOL = 1e-10


def bracket(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Commutator ``XY - YX``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"bracket needs equal square shapes, got {X.shape} and {Y.shape}")
    return X @ Y - Y @ X


def ad_power(X: np.ndarray, Y: np.ndarray, k: int) -> np.ndarray:
    """``ad_X^k Y`` by direct iteration."""
    out = np.asarray(Y)
    for _ in range(k):
        out = bracket(X, out)
    return out


def skew_defect(X: np.ndarray) -> float:
    return float(np.max(np.abs(X + X.conj().T))) if X.size else 0.0


def _vec(X: np.ndarray) -> np.ndarray:
    return np.concatenate([X.real.ravel(), X.imag.ravel()])


def _mat(v: np.ndarray, n: int) -> np.ndarray:
    return (v[: n * n] + 1j * v[n * n :]).reshape(n, n)


def _trace_free(X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    return X - (np.trace(X) / n) * np.eye(n)


@dataclass
class GeneratorSet:
    """Named skew-Hermitian generators of a common dimension."""

    generators: list[np.ndarray]
    labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.generators = [np.asarray(g, dtype=complex) for g in self.generators]
        if not self.generators:
            raise ValueError("empty generator set")
        if not self.labels:
            self.labels = [f"G{i}" for i in range(len(self.generators))]
        if len(self.labels) != len(self.generators):
            raise ValueError("labels and generators differ in length")
        n = self.generators[0].shape[0]
        for g, lab in zip(self.generators, self.labels):
            if g.shape != (n, n):
                raise ValueError(f"generator {lab} has shape {g.shape}, expected {(n, n)}")
            if skew_defect(g) > SKEW_TOL:
                raise ValueError(f"generator {lab} is not skew-Hermitian (defect {skew_defect(g):.2e})")

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]


@dataclass
class ClosureReport:
    dim: int
    dimension_found: int
    dimension_full: int
    basis: list[np.ndarray]
    depth: int
    membership_residuals: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def is_full_rank(self) -> bool:
        return self.dimension_found == self.dimension_full

    def residual(self, X: np.ndarray) -> float:
        """Relative distance of ``X`` from the span of the closure."""
        x = _vec(_trace_free(np.asarray(X, dtype=complex)))
        norm = np.linalg.norm(x)
        if norm == 0:
            return 0.0
        if not self.basis:
            return 1.0
        Q = np.array([_vec(b) for b in self.basis])
        return float(np.linalg.norm(x - Q.T @ (Q @ x)) / norm)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "dimension_found": self.dimension_found,
            "dimension_full": self.dimension_full,
            "is_full_rank": self.is_full_rank,
            "depth": self.depth,
            "membership_residuals": dict(self.membership_residuals),
        }


def lie_closure(gens: GeneratorSet | Sequence[np.ndarray], tol: float = 1e-9) -> ClosureReport:
    """Real Lie algebra generated by ``gens`` (traces projected out).

    Breadth-first: every newly accepted element is bracketed with the whole
    current basis; the bracket is accepted when its component orthogonal to
    the basis exceeds ``tol * |X| * |Y|``.  Stops when a sweep adds nothing or
    the algebra fills ``su(n)``.
    """
    if not isinstance(gens, GeneratorSet):
        gens = GeneratorSet(list(gens))
    if not 0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    n = gens.dim
    full = n * n - 1
    Q = np.zeros((0, 2 * n * n))

    def accept(cands: np.ndarray, scales: np.ndarray) -> np.ndarray:
        nonlocal Q
        added = []
        for c, s in zip(cands, scales):
            if Q.shape[0] >= full:
                break
            r = c - Q.T @ (Q @ c)
            r -= Q.T @ (Q @ r)
            nr = np.linalg.norm(r)
            if nr > tol * s:
                r /= nr
                Q = np.vstack([Q, r])
                added.append(r)
        return np.array(added).reshape(-1, Q.shape[1])

    seeds = np.array([_vec(_trace_free(g)) for g in gens.generators])
    frontier = accept(seeds, np.maximum(np.linalg.norm(seeds, axis=1), 1e-300))
    depth = 0
    while frontier.shape[0] and Q.shape[0] < full:
        depth += 1
        new = []
        for x in frontier:
            X = _mat(x, n)
            basis = Q.copy()
            B = basis[:, : n * n].reshape(-1, n, n) + 1j * basis[:, n * n :].reshape(-1, n, n)
            C = np.einsum("ij,bjk->bik", X, B) - np.einsum("bij,jk->bik", B, X)
            cands = np.concatenate([C.real.reshape(len(C), -1), C.imag.reshape(len(C), -1)], axis=1)
            added = accept(cands, np.ones(len(cands)))  # operands are unit norm
            if added.shape[0]:
                new.append(added)
            if Q.shape[0] >= full:
                break
        frontier = np.vstack(new) if new else np.zeros((0, Q.shape[1]))
    return ClosureReport(
        dim=n,
        dimension_found=Q.shape[0],
        dimension_full=full,
        basis=[_mat(q, n) for q in Q],
        depth=depth,
    )


# --- the rotor's own generator sets -------------------------------------------------

_AXES = {"x": 0, "y": 1, "z": 2}


def molecule_generators(ell: int, controls: str = "xyz") -> GeneratorSet:
    """``{A, B_l : l in controls}`` on the ``4 ell + 4`` two-shell block."""
    ops = two_shell_block(ell)
    gens = [traceless_drift(ops)]
    labels = ["A"]
    for axis in controls:
        gens.append(np.array(ops.couplings[_AXES[axis]]))
        labels.append(f"B{_AXES[axis] + 1}")
    return GeneratorSet(gens, labels)


def block_elements(ell: int) -> dict[str, np.ndarray]:
    """The elementary matrices ``E_{(l,k),(l+1,k+j)}`` for ``j in {-1,0,1}``."""
    ordering = BasisOrdering(ell + 1, ell)
    n = ordering.dim
    out = {}
    for k in range(-ell, ell + 1):
        for j in (-1, 0, 1):
            a, b = ordering.index_of((ell, k)), ordering.index_of((ell + 1, k + j))
            out[f"E[({ell},{k}),({ell + 1},{k + j})]"] = E(a, b, n)
    return out


def certify_block(ell: int, controls: str = "xyz", tol: float = 1e-9) -> ClosureReport:
    """Closure of the molecule generators plus membership of the inter-shell elementary matrices."""
    report = lie_closure(molecule_generators(ell, controls), tol)
    for label, X in block_elements(ell).items():
        report.membership_residuals[label] = report.residual(X)
    return report


def _max_abs(X: np.ndarray) -> float:
    return float(np.max(np.abs(X))) if X.size else 0.0


def verify_bracket_identities(ell: int) -> list[tuple[str, float]]:
    """Max-norm residuals of the bracket relations on the ``4 ell + 4`` block.

    Covers the chain rules for E and F, ``[E_jk, F_jk] = 2 D_jk``, the action
    of the traceless drift on inter-shell E and F, the two ``[E, E]``
    couplings between neighbouring m values and the ``B2 -+ [A, B1]``
    decompositions.  The second ``[E, E]`` coupling is checked in the
    sign-correct form ``[E_(l,m),(l+1,m), E_(l,m+1),(l+1,m)] = -E_(l,m),(l,m+1)``;
    the form with a plus sign is reported separately under ``opposite-sign``.
    """
    if ell < 0:
        raise ValueError("ell must be non-negative")
    ops = two_shell_block(ell)
    ordering = ops.ordering
    n = ordering.dim
    idx = ordering.index_of
    A = traceless_drift(ops)
    worst: dict[str, float] = {}

    def record(label: str, value: float) -> None:
        worst[label] = max(worst.get(label, 0.0), value)

    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            record("[E_jk,F_jk]=2D_jk", _max_abs(bracket(E(j, k, n), F(j, k, n)) - 2 * D(j, k, n)))
            for m in range(n):
                if m in (j, k):
                    continue
                record("[E_jk,E_kn]=E_jn", _max_abs(bracket(E(j, k, n), E(k, m, n)) - E(j, m, n)))
                record("[F_jk,F_kn]=-E_jn", _max_abs(bracket(F(j, k, n), F(k, m, n)) + E(j, m, n)))
                record("[E_jk,F_kn]=F_jn", _max_abs(bracket(E(j, k, n), F(k, m, n)) - F(j, m, n)))

    # the underlying unit-matrix rule, diagonal units included
    for j in range(n):
        for k in range(n):
            for a in range(n):
                for b in range(n):
                    lhs = bracket(_unit(j, k, n), _unit(a, b, n))
                    rhs = (k == a) * _unit(j, b, n) - (j == b) * _unit(a, k, n)
                    record("[e_jk,e_nm]=d_kn e_jm-d_jm e_nk", _max_abs(lhs - rhs))

    for k in range(-ell, ell + 1):
        for h in range(-ell - 1, ell + 2):
            a, b = idx((ell, k)), idx((ell + 1, h))
            record("[A,E]=2(l+1)F", _max_abs(bracket(A, E(a, b, n)) - 2 * (ell + 1) * F(a, b, n)))
            record("[A,F]=-2(l+1)E", _max_abs(bracket(A, F(a, b, n)) + 2 * (ell + 1) * E(a, b, n)))

    for m in range(-ell, ell + 1):
        a, b, c = idx((ell, m)), idx((ell + 1, m)), idx((ell + 1, m - 1))
        record("[E_(l,m)(l+1,m),E_(l,m)(l+1,m-1)]=E_(l+1,m-1)(l+1,m)", _max_abs(bracket(E(a, b, n), E(a, c, n)) - E(c, b, n)))
    for m in range(-ell, ell):
        a, b, c = idx((ell, m)), idx((ell + 1, m)), idx((ell, m + 1))
        lhs = bracket(E(a, b, n), E(c, b, n))
        record("[E_(l,m)(l+1,m),E_(l,m+1)(l+1,m)]=-E_(l,m)(l,m+1)", _max_abs(lhs + E(a, c, n)))
        record("opposite-sign:[E_(l,m)(l+1,m),E_(l,m+1)(l+1,m)]=+E_(l,m)(l,m+1)", _max_abs(lhs - E(a, c, n)))

    ad = bracket(A, ops.B1) / (2 * (ell + 1))
    plus = sum(q_coeff(ell, -m) * E(idx((ell, m)), idx((ell + 1, m + 1)), n) for m in range(-ell, ell + 1))
    minus = sum(q_coeff(ell, m) * E(idx((ell, m)), idx((ell + 1, m - 1)), n) for m in range(-ell, ell + 1))
    record("B2-[A,B1]/(2(l+1))=2 sum q_(l,-m) E_(l,m)(l+1,m+1)", _max_abs(ops.B2 - ad - 2 * plus))
    record("B2+[A,B1]/(2(l+1))=2 sum q_(l,m) E_(l,m)(l+1,m-1)", _max_abs(ops.B2 + ad - 2 * minus))
    return sorted(worst.items())


def _unit(j: int, k: int, n: int) -> np.ndarray:
    e = np.zeros((n, n))
    e[j, k] = 1.0
    return e


def ad_closed_form(ell: int, j: int) -> np.ndarray:
    """``(-1)^j (l+1) 2^(2j+1) sum_m p_(l,m)^(2j+1) E_(l,m),(l+1,m)``."""
    ordering = BasisOrdering(ell + 1, ell)
    n = ordering.dim
    total = np.zeros((n, n), dtype=complex)
    for m in range(-ell, ell + 1):
        total += p_coeff(ell, m) ** (2 * j + 1) * E(ordering.index_of((ell, m)), ordering.index_of((ell + 1, m)), n)
    return (-1) ** j * (ell + 1) * 2 ** (2 * j + 1) * total


def verify_ad_formula(ell: int, j_max: int) -> float:
    """Worst relative residual between ``ad_{B3}^{2j+1} A`` and its closed form."""
    if j_max > 4:
        raise ValueError("j_max above 4 is not supported")
    ops = two_shell_block(ell)
    A = traceless_drift(ops)
    worst = 0.0
    for j in range(j_max + 1):
        direct = ad_power(ops.B3, A, 2 * j + 1)
        closed = ad_closed_form(ell, j)
        worst = max(worst, np.linalg.norm(direct - closed) / np.linalg.norm(closed))
    return float(worst)


# --- compatible gap generators -------------------------------------------------------

PROBE_DIRECTIONS = (
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0),
    (1.0, 0.0, 1.0),
    (0.0, 1.0, 1.0),
)


def gap_mask(eigenvalues: np.ndarray, sigma: float, atol: float = 1e-12) -> np.ndarray:
    lam = np.asarray(eigenvalues)
    return np.abs(np.abs(lam[:, None] - lam[None, :]) - sigma) <= atol


def spectral_gap_values(eigenvalues: np.ndarray, atol: float = 1e-12) -> list[float]:
    lam = np.asarray(eigenvalues)
    diffs = np.abs(lam[:, None] - lam[None, :]).ravel()
    diffs = np.sort(diffs[diffs > atol])
    gaps: list[float] = []
    for d in diffs:
        if not gaps or d - gaps[-1] > atol:
            gaps.append(float(d))
    return gaps


def check_compatible_generator(ops: OperatorSet, n: int, sigma: float, v, N_check: int | None = None) -> bool:
    """True when the gap-``sigma`` part of ``v . B`` never links the first ``n`` states to the rest.

    Every truncation ``n <= N <= N_check`` is inspected; couplings are
    nearest-shell, so one shell beyond ``n`` already decides the answer.
    """
    N_check = ops.dim if N_check is None else N_check
    if not 1 <= n <= N_check <= ops.dim:
        raise ValueError(f"need 1 <= n <= N_check <= {ops.dim}")
    if sigma not in _ClosedGaps(spectral_gap_values(ops.eigenvalues[:N_check])):
        raise ValueError(f"sigma={sigma} is not a spectral gap of the {N_check}-level truncation")
    for N in range(n, N_check + 1):
        lam = ops.eigenvalues[:N]
        M = ops.control_operator(v)[:N, :N] * gap_mask(lam, sigma)
        if np.any(np.abs(M[:n, n:]) > 0):
            return False
    return True


class _ClosedGaps(list):
    def __contains__(self, value) -> bool:
        return any(abs(value - g) <= 1e-12 for g in self)


def m0_generators(ops: OperatorSet, n: int, controls: str = "xyz", N_check: int | None = None) -> GeneratorSet:
    """Finite probe of the compatible set on the leading ``n`` states.

    Traceless drift block plus ``pi_n B_sigma(v) pi_n`` for every gap and every
    probe direction ``v`` supported on ``controls`` that passes the
    compatibility check.
    """
    N_check = ops.dim if N_check is None else N_check
    allowed = {_AXES[c] for c in controls}
    directions = [v for v in PROBE_DIRECTIONS if {i for i, x in enumerate(v) if x} <= allowed]
    gens = [traceless_drift(ops, n)]
    labels = ["A0"]
    for sigma in spectral_gap_values(ops.eigenvalues[:N_check]):
        for v in directions:
            if not check_compatible_generator(ops, n, sigma, v, N_check):
                continue
            block = (ops.control_operator(v) * gap_mask(ops.eigenvalues, sigma))[:n, :n]
            if np.any(block):
                gens.append(block)
                labels.append(f"B_{sigma:g}{tuple(int(x) for x in v)}")
    return GeneratorSet(gens, labels)


def certify_compatible(ops: OperatorSet, n: int, controls: str = "xyz", tol: float = 1e-9) -> ClosureReport:
    """Rank check of the compatible-dynamics probe set at block size ``n``."""
    report = lie_closure(m0_generators(ops, n, controls), tol)
    report.notes.append(
        f"compatibility verified for truncations {n}..{ops.dim}; nearest-shell coupling makes this sufficient"
    )
    return report


def compatible_block_sizes(ell_max: int) -> list[int]:
    """Leading block sizes ``(L+1)^2`` that leave at least one buffer shell."""
    return [(L + 1) ** 2 for L in range(1, ell_max)]


__all__ = [
    "ClosureReport",
    "GeneratorSet",
    "PROBE_DIRECTIONS",
    "ad_closed_form",
    "ad_power",
    "bracket",
    "build_operators",
    "certify_block",
    "certify_compatible",
    "check_compatible_generator",
    "gap_mask",
    "block_elements",
    "lie_closure",
    "m0_generators",
    "molecule_generators",
    "spectral_gap_values",
    "verify_ad_formula",
    "verify_bracket_identities",
]
