"""Sampling times whose phase averages single out one frequency.

Given frequencies ``gamma_1, ..., gamma_k`` we look for times ``t_1 < ... < t_h``,
pairwise separated by more than ``R``, such that the empirical average of
``exp(i gamma_j t)`` is close to ``nu * xi`` for ``j = 1`` and close to zero
otherwise, where ``nu = prod_{k>=2} cos(pi / 2k)``.

Construction.  When all ratios ``gamma_j / gamma_1`` are rational the
frequencies are integer multiples ``b_j g`` of a base frequency ``g``.  The
phase ``y = g t mod 2 pi`` is then drawn from the density
``(1 + 2 nu cos(a y - arg xi)) / 2 pi`` (``a = gamma_1 / g``), which is
positive because ``nu < 1/2`` and has no Fourier modes besides ``0`` and
``+-a``.  The ``h`` phases are the midpoint quantiles of that density, which
integrate trigonometric polynomials of low degree to rounding accuracy.
They are visited in golden-ratio order so that partial averages stay
balanced, and each is lifted to the first time on its residue class that
respects the separation.  Frequencies that are not commensurate with
``gamma_1`` are equidistributed by the lattice jumps and then reduced by a
seeded local search over those jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_DENOMINATOR = 64


def nu_constant(k_max: int) -> float:
    """Partial product ``prod_{k=2}^{k_max} cos(pi / 2k)`` (decreases towards ``nu``)."""
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    k = np.arange(2, k_max + 1, dtype=float)
    return float(np.exp(np.sum(np.log(np.cos(np.pi / (2.0 * k))))))


def nu_bounds(k_max: int) -> tuple[float, float]:
    """Rigorous bracket ``(lower, upper)`` for the infinite product.

    Uses ``-log cos x <= x^2 / (2 cos^2 x)`` and ``sum_{k>K} k^-2 < 1/K``.
    """
    upper = nu_constant(k_max)
    c = math.cos(math.pi / (2 * (k_max + 1))) ** 2
    tail = math.pi**2 / (8.0 * c * k_max)
    return upper * math.exp(-tail), upper


@lru_cache(maxsize=1)
def nu_value() -> float:
    lo, hi = nu_bounds(10**6)
    return math.sqrt(lo * hi)


@dataclass
class PhaseSequence:
    times: np.ndarray
    gamma_primary: float
    gamma_rest: tuple[float, ...]
    xi: complex
    achieved: np.ndarray
    nu: float
    R: float
    tolerance: float
    mode: str = "density"
    base_frequency: float | None = None
    phases: np.ndarray = field(default=None, repr=False)  # g * t mod 2 pi, when commensurate

    @property
    def h(self) -> int:
        return len(self.times)

    @property
    def target(self) -> np.ndarray:
        lead = self.xi if self.mode == "aligned" else self.nu * self.xi
        return np.concatenate([[lead], np.zeros(len(self.gamma_rest))])

    @property
    def deviation(self) -> float:
        return float(np.max(np.abs(self.achieved - self.target)))

    @property
    def min_separation(self) -> float:
        return float(np.min(np.diff(self.times))) if self.h > 1 else math.inf


def averages(times: np.ndarray, gammas) -> np.ndarray:
    """Empirical means of ``exp(i gamma t)`` for each frequency."""
    t = np.asarray(times, dtype=float)
    return np.array([np.mean(np.exp(1j * g * t)) for g in gammas])


def default_tolerance(h: int) -> float:
    return 8.0 / h


def _commensurate(gamma1: float, rest) -> tuple[float, int, dict[int, int], list[int]]:
    """Base frequency ``g`` and integer multiples for the rationally related frequencies.

    Returns ``(g, a, multiples, loose)`` with ``gamma_1 = a g``,
    ``gamma_rest[j] = multiples[j] g`` and ``loose`` the indices that are not
    rationally related at denominators up to ``MAX_DENOMINATOR``.
    """
    ratios: dict[int, Fraction] = {}
    loose = []
    for j, gj in enumerate(rest):
        r = gj / gamma1
        fr = Fraction(r).limit_denominator(MAX_DENOMINATOR)
        if abs(float(fr) - r) <= 1e-12 * max(1.0, abs(r)):
            ratios[j] = fr
        else:
            loose.append(j)
    den = reduce(math.lcm, (fr.denominator for fr in ratios.values()), 1)
    ints = {j: int(fr * den) for j, fr in ratios.items()}
    common = reduce(math.gcd, [den, *ints.values()], 0) or 1
    a = den // common
    g = abs(gamma1) / a
    return g, int(math.copysign(a, gamma1)), {j: b // common for j, b in ints.items()}, loose


def _density_quantiles(h: int, a: int, nu: float, phi: float) -> np.ndarray:
    """Midpoint quantiles on [0, 2 pi) of ``(1 + 2 nu cos(a y)) / 2 pi``, shifted by ``phi / a``."""
    u = (np.arange(h) + 0.5) / h
    y = 2 * np.pi * u
    for _ in range(60):
        F = y / (2 * np.pi) + nu * np.sin(a * y) / (np.pi * a)
        f = (1 + 2 * nu * np.cos(a * y)) / (2 * np.pi)
        step = (F - u) / f
        y = np.clip(y - step, 0.0, 2 * np.pi)
        if np.max(np.abs(step)) < 1e-15:
            break
    return y + phi / a


def golden_order(h: int) -> np.ndarray:
    """Permutation of ``range(h)`` following the golden-ratio (Kronecker) sequence."""
    keys = np.mod(np.arange(1, h + 1) * GOLDEN, 1.0)
    return np.argsort(np.argsort(keys))


def _lift(phases: np.ndarray, g: float, tau0: float, R: float) -> np.ndarray:
    """Smallest increasing times with ``g t = phase mod 2 pi``, ``t_1 >= tau0`` and gaps > R."""
    period = 2 * np.pi / g
    base = np.mod(phases, 2 * np.pi) / g
    times = np.empty(len(phases))
    prev = None
    for i, b in enumerate(base):
        floor = tau0 if prev is None else prev + R
        k = math.ceil((floor - b) / period)
        t = b + k * period
        if prev is None:
            if t < tau0:
                t += period
        else:
            while t - prev <= R:
                t += period
        times[i] = t
        prev = t
    return times


def _polish(times, g, gammas, targets, R, tau0, rng, sweeps: int = 20) -> np.ndarray:
    """Local search over whole-period shifts of single times (keeps every phase ``g t``)."""
    period = 2 * np.pi / g
    times = times.copy()
    gam = np.asarray(gammas)
    tgt = np.asarray(targets)
    terms = np.exp(1j * np.outer(gam, times))
    h = len(times)

    def cost(sums):
        return float(np.max(np.abs(sums / h - tgt)))

    sums = terms.sum(axis=1)
    best = cost(sums)
    for _ in range(sweeps):
        improved = False
        for i in rng.permutation(h):
            lo = tau0 if i == 0 else times[i - 1] + R
            hi = math.inf if i == h - 1 else times[i + 1] - R
            for shift in (-3, -2, -1, 1, 2, 3):
                t_new = times[i] + shift * period
                if not (t_new >= lo and t_new < hi) or (i > 0 and t_new - times[i - 1] <= R):
                    continue
                if i < h - 1 and times[i + 1] - t_new <= R:
                    continue
                col = np.exp(1j * gam * t_new)
                trial = sums - terms[:, i] + col
                c = cost(trial)
                if c < best:
                    best, sums = c, trial
                    terms[:, i] = col
                    times[i] = t_new
                    improved = True
                    break
        if not improved:
            break
    return times


def phase_sequence(
    gamma_primary: float,
    gamma_rest,
    xi: complex,
    h: int,
    R: float,
    tau0: float = 0.0,
    tol: float | None = None,
    seed: int = 0,
) -> PhaseSequence:
    """Times ``t_1 < ... < t_h`` averaging ``exp(i gamma t)`` to ``(nu xi, 0, ..., 0)``.

    With no other frequencies the times sit on the exact resonance lattice and
    the average is ``xi`` itself.  Raises ``ValueError`` if the achieved
    deviation exceeds ``tol`` (default ``8 / h``).
    """
    gamma_rest = tuple(float(g) for g in gamma_rest)
    gamma1 = float(gamma_primary)
    if h < 1:
        raise ValueError("h must be positive")
    if R <= 0:
        raise ValueError("R must be positive")
    if gamma1 == 0 or any(g == 0 for g in gamma_rest):
        raise ValueError("frequencies must be non-zero")
    if any(abs(abs(g) - abs(gamma1)) <= 1e-12 * abs(gamma1) for g in gamma_rest):
        raise ValueError("|gamma_1| must differ from every other |gamma_j|")
    xi = complex(xi)
    if abs(abs(xi) - 1.0) > 1e-12:
        raise ValueError("xi must have unit modulus")
    tol = default_tolerance(h) if tol is None else tol
    nu = nu_value()
    phi = math.atan2(xi.imag, xi.real)

    if not gamma_rest:
        phases = np.full(h, phi if gamma1 > 0 else -phi)
        times = _lift(phases, abs(gamma1), tau0, R)
        seq = PhaseSequence(times, gamma1, (), xi, averages(times, [gamma1]), nu, R, tol, "aligned", abs(gamma1), np.mod(phases, 2 * np.pi))
    else:
        g, a, _, loose = _commensurate(gamma1, gamma_rest)
        y = _density_quantiles(h, a, nu, phi)[golden_order(h)]
        times = _lift(y, g, tau0, R)
        if loose:
            # spread the incommensurate frequencies with golden-ratio lattice jumps
            period = 2 * np.pi / g
            jumps = np.floor(np.arange(h) * (1 + GOLDEN) * 7) % 11
            times = times + np.cumsum(jumps) * period
            gammas = [gamma1, *gamma_rest]
            targets = np.concatenate([[nu * xi], np.zeros(len(gamma_rest))])
            if np.max(np.abs(averages(times, gammas) - targets)) > tol:
                times = _polish(times, g, gammas, targets, R, tau0, np.random.default_rng(seed))
        seq = PhaseSequence(
            times, gamma1, gamma_rest, xi, averages(times, [gamma1, *gamma_rest]), nu, R, tol, "density", g, np.mod(y, 2 * np.pi)
        )
    if seq.deviation > tol:
        raise ValueError(f"phase averages miss their targets by {seq.deviation:.3e} > tol={tol:.3e} at h={h}")
    return seq
