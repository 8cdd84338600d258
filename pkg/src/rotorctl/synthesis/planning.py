"""Factorising targets on the leading ``n`` states into compatible exponentials.

Three strategies are tried in order:

* direct fit: the target is ``exp(theta K)`` for a single phased gap
  generator ``K`` (or pure drift);
* tree Givens: when the compatible generators include rank-two elements,
  each is a plane rotation between two orthonormal "node" vectors.  If the
  nodes form a spanning tree of an orthonormal basis (``n = 4``: the s state
  joined to the three p states), any target is eliminated column by column
  with such rotations, and the remaining diagonal is removed with pairs of
  half-turns;
* Strang splitting of ``log(target)`` when it lies in the real span of the
  compatible generators and the drift.

Targets that need bracket directions outside every strategy raise
:class:`PlanningError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import logm
from scipy.optimize import minimize_scalar

from ..basis import OperatorSet, traceless_drift
from ..lie import certify_compatible, check_compatible_generator
from ..propagation import PiecewiseControl, StateVector, expm_skew
from .gaps import GapGenerator, gap_generator, spectral_gaps
from .tracking import PathSegment, TrackingResult, drift_period, tracking_control

MAX_SEGMENTS = 500
AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlanSegment:
    kind: str  # "drift" or "gap"
    angle: float
    sigma: float | None = None
    v: tuple[float, float, float] | None = None
    xi: complex = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("drift", "gap"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if not self.angle > 0:
            raise ValueError("segment angles must be positive")
        if self.kind == "gap" and (self.sigma is None or self.v is None):
            raise ValueError("gap segments need sigma and v")

    def generator(self, ops: OperatorSet) -> GapGenerator | None:
        if self.kind == "drift":
            return None
        return gap_generator(ops, self.sigma, self.v).with_phase(self.xi)

    def path_segment(self, ops: OperatorSet) -> PathSegment:
        return PathSegment(self.angle, self.generator(ops))

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "angle": self.angle}
        if self.kind == "gap":
            out["sigma"] = self.sigma
            out["v"] = list(self.v)
            out["xi"] = [self.xi.real, self.xi.imag]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PlanSegment":
        xi = complex(*d["xi"]) if "xi" in d else 1.0
        v = tuple(float(x) for x in d["v"]) if d.get("v") is not None else None
        return cls(d["kind"], float(d["angle"]), d.get("sigma"), v, xi)


@dataclass
class ControlPlan:
    n: int
    target: np.ndarray
    segments: list[PlanSegment]
    predicted_error: float
    method: str = "direct"
    realized: PiecewiseControl | None = None
    tracking: TrackingResult | None = field(default=None, repr=False)

    def path(self, ops: OperatorSet) -> list[PathSegment]:
        return [s.path_segment(ops) for s in self.segments]

    def product(self, ops: OperatorSet) -> np.ndarray:
        """Chronological product of the segment exponentials on the first ``n`` states."""
        U = np.eye(self.n, dtype=complex)
        A0 = traceless_drift(ops, self.n)
        for s in self.segments:
            G = A0 if s.kind == "drift" else s.generator(ops).block(self.n)
            U = expm_skew(G, s.angle) @ U
        return U

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "target": [[z.real, z.imag] for z in np.asarray(self.target).ravel()],
            "segments": [s.to_dict() for s in self.segments],
            "residual": self.predicted_error,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlPlan":
        n = int(d["n"])
        target = np.array([complex(re, im) for re, im in d["target"]]).reshape(n, n)
        segs = [PlanSegment.from_dict(s) for s in d["segments"]]
        return cls(n, target, segs, float(d["residual"]), d.get("method", "direct"))


def phase_insensitive_distance(U: np.ndarray, V: np.ndarray) -> float:
    """``min_phi ||U - exp(i phi) V||_2`` (states or matrices)."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.ndim == 1:
        ov = np.vdot(V, U)
        phase = ov / abs(ov) if abs(ov) > 0 else 1.0
        return float(np.linalg.norm(U - phase * V))
    # the minimiser of the spectral norm has no closed form; the Frobenius
    # minimiser is an excellent start and a bounded scalar search finishes it
    ov = np.trace(V.conj().T @ U)
    phi0 = np.angle(ov) if abs(ov) > 0 else 0.0
    f = lambda p: np.linalg.norm(U - np.exp(1j * p) * V, 2)  # noqa: E731
    res = minimize_scalar(f, bounds=(phi0 - 0.5, phi0 + 0.5), method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, f(phi0)))


def _check_unitary(target: np.ndarray, n: int) -> np.ndarray:
    U = np.asarray(target, dtype=complex)
    if U.shape != (n, n):
        raise ValueError(f"target must be {n}x{n}, got {U.shape}")
    if np.max(np.abs(U.conj().T @ U - np.eye(n))) > 1e-8:
        raise ValueError("target is not unitary")
    return U


@lru_cache(maxsize=32)
def _certified(ell_max: int, ell_min: int, n: int) -> bool:
    from ..basis import build_operators

    return certify_compatible(build_operators(ell_max, ell_min), n).is_full_rank


def compatible_generators(ops: OperatorSet, n: int) -> list[tuple[float, tuple[float, float, float], np.ndarray]]:
    """``(sigma, axis, up-part block)`` for every compatible single-axis gap generator."""
    out = []
    for sigma in spectral_gaps(ops).gaps:
        for v in AXES:
            if not check_compatible_generator(ops, n, sigma, v):
                continue
            up = gap_generator(ops, sigma, v).up_part[:n, :n]
            if np.any(up):
                out.append((sigma, v, up))
    return out


def _skew_from_up(up: np.ndarray, c: complex) -> np.ndarray:
    X = c * up
    return X - X.conj().T


# -- direct fit -------------------------------------------------------------


def _su_logs(U: np.ndarray):
    n = U.shape[0]
    base = np.angle(np.linalg.det(U)) / n
    for k in range(n):
        W = U * np.exp(-1j * (base + 2 * np.pi * k / n))
        K = logm(W)
        yield 0.5 * (K - K.conj().T)


def _direct_fit(ops: OperatorSet, U: np.ndarray, n: int, tol: float) -> list[PlanSegment] | None:
    comp = compatible_generators(ops, n)
    A0 = traceless_drift(ops, n)
    best = None
    for K in _su_logs(U):
        if np.max(np.abs(K)) < 1e-14:
            return []
        # pure drift
        t = float(np.real(np.vdot(A0, K)) / np.real(np.vdot(A0, A0)))
        if t and np.linalg.norm(K - t * A0) <= 1e-10 * np.linalg.norm(K):
            period = drift_period(ops.eigenvalues[:n]) or math.inf
            t = t % period if math.isfinite(period) else t
            if t > 0:
                segs = [PlanSegment("drift", t)]
                best = _better(best, segs, ops, U, n)
            continue
        for sigma in {s for s, _, _ in comp}:
            ups = [(v, up) for s, v, up in comp if s == sigma]
            mask = np.any([np.abs(up) > 0 for _, up in ups], axis=0)
            if np.linalg.norm(K * ~(mask | mask.T)) > 1e-8 * np.linalg.norm(K):
                continue
            Amat = np.column_stack([up[mask] for _, up in ups])
            c, *_ = np.linalg.lstsq(Amat, K[mask], rcond=None)
            j = int(np.argmax(np.abs(c)))
            if abs(c[j]) < 1e-14:
                continue
            xi = c[j] / abs(c[j])
            w = np.real(c * np.conj(xi))
            if np.any(w < -1e-9 * abs(c[j])):
                continue
            theta = float(np.max(w))
            v = tuple(float(x) for x in np.clip(w / theta, 0.0, 1.0))
            best = _better(best, [PlanSegment("gap", theta, sigma, v, complex(xi))], ops, U, n)
    if best is not None and best[0] <= tol:
        return best[1]
    return None


def _better(best, segs, ops, U, n):
    plan = ControlPlan(n, U, segs, 0.0)
    err = phase_insensitive_distance(plan.product(ops), U)
    if best is None or err < best[0]:
        return (err, segs)
    return best


# -- tree Givens ------------------------------------------------------------


@dataclass(frozen=True)
class _Edge:
    a: int
    b: int  # the generator's up part maps node a to node b
    sigma: float
    v: tuple[float, float, float]
    weight: float  # |<b|up|a>|: exp(theta K) turns the plane by theta * weight
    phase: complex  # <b|up|a> / weight


@dataclass(frozen=True)
class RotationTree:
    """Orthonormal node vectors (columns) joined by single-plane gap rotations."""

    nodes: np.ndarray
    edges: tuple[_Edge, ...]
    root: int

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    def neighbours(self, k: int, alive: set[int]) -> list[int]:
        out = []
        for e in self.edges:
            if k in (e.a, e.b):
                other = e.b if k == e.a else e.a
                if other in alive:
                    out.append(other)
        return out

    def leaves_first(self) -> list[int]:
        """Non-root nodes, each a leaf of the tree left after removing its predecessors."""
        alive = set(range(self.n))
        order = []
        while len(alive) > 1:
            leaf = next((k for k in sorted(alive) if k != self.root and len(self.neighbours(k, alive)) == 1), None)
            if leaf is None:
                raise PlanningError("rotation graph is not a tree")
            order.append(leaf)
            alive.discard(leaf)
        return order

    def edge(self, j: int, k: int) -> _Edge:
        for e in self.edges:
            if {e.a, e.b} == {j, k}:
                return e
        raise KeyError((j, k))

    def path(self, j: int, k: int, alive: set[int]) -> list[int]:
        prev: dict[int, int | None] = {j: None}
        queue = [j]
        while queue:
            x = queue.pop(0)
            for y in self.neighbours(x, alive):
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        if k not in prev:
            raise PlanningError(f"nodes {j} and {k} are not connected")
        out = [k]
        while prev[out[-1]] is not None:
            out.append(prev[out[-1]])
        return out[::-1]


def rotation_tree(ops: OperatorSet, n: int) -> RotationTree | None:
    """Spanning tree of plane rotations among the compatible generators, if one exists."""
    vecs: list[np.ndarray] = []
    raw = []

    def node(x: np.ndarray) -> int:
        for i, y in enumerate(vecs):
            if abs(abs(np.vdot(y, x)) - 1.0) < 1e-10:
                return i
        vecs.append(x)
        return len(vecs) - 1

    for sigma, v, up in compatible_generators(ops, n):
        if np.linalg.matrix_rank(up, tol=1e-12) != 1:
            continue
        u, _, wh = np.linalg.svd(up)
        raw.append((node(wh[0].conj()), node(u[:, 0]), sigma, v, up))
    if len(vecs) != n or len(raw) != n - 1:
        return None
    nodes = np.column_stack(vecs)
    if np.max(np.abs(nodes.conj().T @ nodes - np.eye(n))) > 1e-10:
        return None
    edges = []
    for a, b, sigma, v, up in raw:
        w = nodes[:, b].conj() @ up @ nodes[:, a]
        edges.append(_Edge(a, b, sigma, v, float(abs(w)), complex(w / abs(w))))
    roots = [k for k in range(n) if all(k != e.b for e in edges)]
    if len(roots) != 1:
        return None
    tree = RotationTree(nodes, tuple(edges), roots[0])
    try:
        tree.leaves_first()
    except PlanningError:
        return None
    return tree


def _rot2(phi: float, zeta: complex) -> np.ndarray:
    """``exp(phi [[0, -conj(zeta)], [zeta, 0]])`` on the ordered pair ``(a, b)``."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -np.conj(zeta) * s], [zeta * s, c]])


class _Rotations:
    """Node-basis plane rotations, recorded as gap segments in application order."""

    def __init__(self, tree: RotationTree) -> None:
        self.tree = tree
        self.segments: list[PlanSegment] = []

    def segment(self, e: _Edge, phi: float, zeta: complex) -> PlanSegment | None:
        phi = phi % (2 * math.pi)
        if phi > math.pi:
            phi, zeta = 2 * math.pi - phi, -zeta
        if phi < 1e-15:
            return None
        # in node coordinates xi * up acts as xi * phase * weight |b><a|
        return PlanSegment("gap", phi / e.weight, e.sigma, e.v, complex(zeta * np.conj(e.phase)))

    def apply(self, X: np.ndarray, e: _Edge, phi: float, zeta: complex) -> np.ndarray:
        seg = self.segment(e, phi, zeta)
        if seg is None:
            return X
        X = X.copy()
        X[[e.a, e.b]] = _rot2(phi, zeta) @ X[[e.a, e.b]]
        self.segments.append(seg)
        return X

    def zero(self, X: np.ndarray, col: int, kill: int, keep: int) -> np.ndarray:
        """Rotate in plane (kill, keep) so that ``X[kill, col]`` vanishes."""
        e = self.tree.edge(kill, keep)
        xa, xb = X[e.a, col], X[e.b, col]
        if abs(X[kill, col]) < 1e-15:
            return X
        if kill == e.b:  # c x_b + zeta s x_a = 0
            phi = math.atan2(abs(xb), abs(xa))
            zeta = -np.exp(1j * (np.angle(xb) - np.angle(xa)))
        else:  # c x_a - conj(zeta) s x_b = 0
            phi = math.atan2(abs(xa), abs(xb))
            zeta = np.exp(1j * (np.angle(xb) - np.angle(xa)))
        return self.apply(X, e, phi, zeta)


def _gather(X: np.ndarray, col: int, target: int, alive: set[int], rot: _Rotations) -> np.ndarray:
    """Rotate all weight of column ``col`` onto node ``target`` (farthest nodes first)."""
    tree = rot.tree
    order = sorted((k for k in alive if k != target), key=lambda k: (-len(tree.path(k, target, alive)), k))
    for k in order:
        X = rot.zero(X, col, k, tree.path(k, target, alive)[1])
    return X


def _inverse(segs: list[PlanSegment]) -> list[PlanSegment]:
    return [PlanSegment(s.kind, s.angle, s.sigma, s.v, -s.xi) for s in reversed(segs)]


def _diagonal_segments(tree: RotationTree, delta: np.ndarray) -> list[PlanSegment]:
    """Half-turn pairs giving ``diag(exp(i delta))`` up to a global phase.

    On edge (a, b) the half-turns with node phases 1 and ``-exp(-i beta)``
    multiply to ``diag(exp(i beta), exp(-i beta))``.  Leaves are peeled towards
    the root; the root absorbs the rest, which is the global phase.
    """
    need = np.array(delta, dtype=float) - np.mean(delta)
    rot = _Rotations(tree)
    alive = set(range(tree.n))
    segs: list[PlanSegment] = []
    for k in tree.leaves_first():
        nbr = tree.neighbours(k, alive)[0]
        e = tree.edge(k, nbr)
        beta = need[k] if k == e.a else -need[k]
        need[e.a] -= beta
        need[e.b] += beta
        alive.discard(k)
        beta = (beta + math.pi) % (2 * math.pi) - math.pi
        if abs(beta) > 1e-14:
            for zeta in (1.0 + 0j, complex(-np.exp(-1j * beta))):
                segs.append(rot.segment(e, math.pi / 2, zeta))
    return segs


def _givens(U: np.ndarray, tree: RotationTree) -> list[PlanSegment]:
    W = tree.nodes
    V = W.conj().T @ U @ W
    rot = _Rotations(tree)
    alive = set(range(tree.n))
    for k in tree.leaves_first():
        V = _gather(V, k, k, alive, rot)
        alive.discard(k)
    # R_K ... R_1 U = D, so U = R_1^-1 ... R_K^-1 D: D acts first
    return _diagonal_segments(tree, np.angle(np.diag(V))) + _inverse(rot.segments)


# -- splitting ----------------------------------------------------------------


def _span_basis(ops: OperatorSet, n: int):
    comp = compatible_generators(ops, n)
    basis = [("drift", None, None, traceless_drift(ops, n))]
    for sigma, v, up in comp:
        basis.append(("gap", sigma, (v, 1.0 + 0j), _skew_from_up(up, 1.0)))
        basis.append(("gap", sigma, (v, 1j), _skew_from_up(up, 1j)))
    return basis


def _split(ops: OperatorSet, U: np.ndarray, n: int, tol: float, max_segments: int) -> tuple[list[PlanSegment], float]:
    basis = _span_basis(ops, n)
    M = np.column_stack([np.concatenate([b[3].real.ravel(), b[3].imag.ravel()]) for b in basis])
    best_res = math.inf
    for K in _su_logs(U):
        k = np.concatenate([K.real.ravel(), K.imag.ravel()])
        coef, *_ = np.linalg.lstsq(M, k, rcond=None)
        miss = np.linalg.norm(M @ coef - k)
        if miss > 1e-9 * max(1.0, np.linalg.norm(k)):
            best_res = min(best_res, miss)
            continue
        # collect complex coefficient per (sigma, axis)
        t_drift = float(coef[0])
        per: dict = {}
        for (kind, sigma, meta, _), c in zip(basis[1:], coef[1:]):
            v, ph = meta
            per.setdefault((sigma, v), 0j)
            per[(sigma, v)] += c * ph
        steps = 1
        while True:
            segs = _strang(per, t_drift, steps, ops, n)
            if len(segs) > max_segments:
                raise PlanningError(f"splitting needs more than {max_segments} segments for tol={tol:g}")
            err = phase_insensitive_distance(ControlPlan(n, U, segs, 0.0).product(ops), U)
            if err <= tol:
                return segs, err
            steps *= 2
    raise PlanningError(
        f"target generator lies outside the compatible span (projection miss {best_res:.2e}); bracket directions would be needed"
    )


def _strang(per: dict, t_drift: float, steps: int, ops: OperatorSet, n: int) -> list[PlanSegment]:
    items = [(sigma, v, c) for (sigma, v), c in per.items() if abs(c) > 1e-15]
    half = []
    for sigma, v, c in items:
        half.append(PlanSegment("gap", abs(c) / (2 * steps), sigma, v, complex(c / abs(c))))
    period = drift_period(ops.eigenvalues[:n]) or math.inf
    mid: list[PlanSegment] = []
    if abs(t_drift) > 1e-15:
        t = (t_drift / steps) % period
        if t > 1e-15:
            mid = [PlanSegment("drift", t)]
    one = half + mid + half[::-1]
    if not items:
        one = mid
    return one * steps


# -- entry points -------------------------------------------------------------


def plan_unitary(
    ops: OperatorSet,
    target: np.ndarray,
    n: int,
    tol: float = 1e-8,
    h: int | None = None,
    delta: float | None = None,
    max_segments: int = MAX_SEGMENTS,
    certify: bool = True,
) -> ControlPlan:
    """Ordered compatible exponentials whose product is ``target`` on the first ``n`` states.

    With ``h`` and ``delta`` the plan is also realised as a lab-frame control.
    """
    U = _check_unitary(target, n)
    if n > ops.dim:
        raise ValueError(f"n={n} exceeds the truncation dimension {ops.dim}")
    if certify and not _certified(ops.ell_max, ops.ordering.ell_min, n):
        raise PlanningError(f"compatible dynamics are not certified full rank at n={n}")
    if phase_insensitive_distance(U, np.eye(n)) <= tol:
        plan = ControlPlan(n, U, [], phase_insensitive_distance(U, np.eye(n)), "identity")
    else:
        segs = _direct_fit(ops, U, n, tol)
        method = "direct"
        if segs is None:
            tree = rotation_tree(ops, n)
            if tree is not None:
                segs, method = _givens(U, tree), "givens"
            else:
                segs, _ = _split(ops, U, n, tol, max_segments)
                method = "splitting"
        plan = ControlPlan(n, U, segs, 0.0, method)
        plan.predicted_error = phase_insensitive_distance(plan.product(ops), U)
        if len(segs) > max_segments:
            raise PlanningError(f"plan has {len(segs)} segments, budget {max_segments}")
        if plan.predicted_error > tol:
            raise PlanningError(f"factorisation residual {plan.predicted_error:.3e} above tol={tol:g}")
    if h is not None and delta is not None:
        realize(ops, plan, h, delta)
    return plan


def realize(ops: OperatorSet, plan: ControlPlan, h: int, delta: float, simulate: bool = False, seed: int = 0) -> TrackingResult:
    res = tracking_control(ops, plan.path(ops), h, delta, simulate=simulate, seed=seed)
    plan.realized = res.lab
    plan.tracking = res
    return res


def plan_state_transfer(ops: OperatorSet, psi0: StateVector, psi1: StateVector, n: int) -> ControlPlan:
    """Plan moving ``psi0`` to ``psi1`` (up to phase) with rotations on the first ``n`` states.

    Both states are rotated onto the tree's root; the plan is the first
    reduction followed by the inverse of the second.
    """
    a = np.asarray(psi0.amplitudes)
    b = np.asarray(psi1.amplitudes)
    if np.any(np.abs(a[n:]) > 1e-12) or np.any(np.abs(b[n:]) > 1e-12):
        raise PlanningError(f"states have support outside the first {n} levels")
    tree = rotation_tree(ops, n)
    if tree is None:
        raise PlanningError(f"no plane-rotation tree among the compatible generators at n={n}")
    W = tree.nodes
    alive = set(range(n))
    r0, r1 = _Rotations(tree), _Rotations(tree)
    _gather((W.conj().T @ a[:n]).reshape(-1, 1), 0, tree.root, alive, r0)
    _gather((W.conj().T @ b[:n]).reshape(-1, 1), 0, tree.root, alive, r1)
    plan = ControlPlan(n, np.eye(n, dtype=complex), r0.segments + _inverse(r1.segments), 0.0, "state-transfer")
    plan.target = plan.product(ops)
    plan.predicted_error = phase_insensitive_distance(plan.target @ a[:n], b[:n])
    return plan
