"""Realising a piecewise-constant path of gap generators with small lab fields.

Lab time plays the role of the drift phase ``omega``.  A gap segment
``exp(theta * K)`` becomes ``h`` short pulses of amplitude ``delta * v``
centred at the times of a phase sequence for that gap; between pulses the
field is off and the drift runs freely.  Averaged over the pulses, the
interaction-frame generator reduces to ``|c| sinc(sigma tau_p / 2) K``, where
``c`` is the achieved leading phase average and ``tau_p`` the pulse length.
The segment length is chosen so that this effective rotation equals
``theta``.  Drift-marker segments are free evolution of their own length.
At the end the schedule is padded with free evolution until its total lab
time matches the path's drift time modulo the drift period, so the lab
propagator and the path product coincide (not just in the interaction frame).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.optimize import brentq

from ..basis import OperatorSet
from ..propagation import PiecewiseControl, ReparametrizedControl, expm_skew, propagator_matrix, reparametrize
from .gaps import GapGenerator, spectral_gaps
from .phases import PhaseSequence, phase_sequence


@dataclass(frozen=True)
class PathSegment:
    """``exp(duration * generator.effective)``, or free drift when ``generator`` is None."""

    duration: float
    generator: GapGenerator | None = None

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError("path segments need positive durations")

    @property
    def is_drift(self) -> bool:
        return self.generator is None


@dataclass
class TrackingResult:
    control: ReparametrizedControl
    lab: PiecewiseControl
    error: float
    sequences: list[PhaseSequence] = field(default_factory=list)
    staircase: list[np.ndarray] = field(default_factory=list)
    drift_time: float = 0.0

    @property
    def total_time(self) -> float:
        return self.lab.total_time


def drift_period(eigenvalues) -> float | None:
    """Smallest ``T > 0`` with ``exp(T A)`` a multiple of the identity, if the spectrum is commensurate."""
    lam = np.asarray(eigenvalues, dtype=float)
    diffs = np.unique(np.abs(lam - lam[0]))
    diffs = diffs[diffs > 1e-12]
    if not len(diffs):
        return 2 * math.pi
    fracs = [Fraction(d / diffs[0]).limit_denominator(1000) for d in diffs]
    if any(abs(float(f) - d / diffs[0]) > 1e-12 for f, d in zip(fracs, diffs)):
        return None
    den = reduce(math.lcm, (f.denominator for f in fracs), 1)
    g = diffs[0] / den * reduce(math.gcd, (int(f * den) for f in fracs), 0)
    return 2 * math.pi / g


def path_propagator(ops: OperatorSet, path) -> np.ndarray:
    """Chronological product of the path exponentials on the full truncation."""
    U = np.eye(ops.dim, dtype=complex)
    for seg in path:
        if seg.is_drift:
            U = np.diag(np.exp(1j * np.asarray(ops.eigenvalues) * seg.duration)) @ U
        else:
            U = expm_skew(seg.generator.effective, seg.duration) @ U
    return U


def _sinc(x: float) -> float:
    return 1.0 if x == 0 else math.sin(x) / x


def tracking_control(
    ops: OperatorSet,
    path,
    h: int,
    delta: float,
    N: int | None = None,
    simulate: bool = True,
    seed: int = 0,
) -> TrackingResult:
    """Drift-speed / amplitude controls tracking ``path``; ``error`` is the simulated operator-norm miss.

    ``N`` selects the truncation whose spectral gaps are averaged out
    (default: the whole of ``ops``).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if h < 1:
        raise ValueError("h must be positive")
    path = list(path)
    gaps = spectral_gaps(ops, N).gaps
    lam = np.asarray(ops.eigenvalues)
    z = 1.0 / delta
    rep: list[tuple[float, float, float, float, float]] = []
    sequences: list[PhaseSequence] = []
    staircase: list[np.ndarray] = []
    t = 0.0
    drift_time = 0.0

    def wait(duration: float) -> None:
        if duration > 1e-13:
            rep.append((duration * delta, z, 0.0, 0.0, 0.0))

    for seg in path:
        if seg.is_drift:
            wait(seg.duration)
            t += seg.duration
            drift_time += seg.duration
            continue
        G = seg.generator
        if not np.any(G.matrix):
            raise ValueError(f"gap generator sigma={G.sigma}, v={G.v} vanishes on this truncation")
        if max(G.v) <= 0:
            raise ValueError("generator direction v must be non-zero")
        sigma = G.sigma
        xi_abs = G.xi * np.exp(1j * sigma * drift_time)
        xi_abs /= abs(xi_abs)
        rest = [g for g in gaps if abs(g - sigma) > 1e-12]
        theta = seg.duration
        probe = phase_sequence(sigma, rest, xi_abs, h, R=1.0, tau0=t, seed=seed)
        strength = abs(probe.achieved[0])

        # reparametrised length S: S * strength * sinc(sigma * S / (2 h delta)) = theta
        def residual(S: float) -> float:
            return S * strength * _sinc(sigma * S / (2 * h * delta)) - theta

        S_max = math.pi * h * delta / sigma  # S * sinc(.) peaks here
        if residual(S_max) < 0:
            raise ValueError(
                f"slope constraint infeasible: rotation {theta:.3g} needs more than h={h} pulses at delta={delta}"
            )
        S = brentq(residual, theta / strength, S_max, xtol=1e-15, rtol=1e-15) if residual(theta / strength) < 0 else theta / strength
        tau_p = S / (h * delta)
        seq = phase_sequence(sigma, rest, xi_abs, h, R=tau_p, tau0=t + tau_p / 2, seed=seed)
        sequences.append(seq)
        staircase.append(seq.times.copy())
        v = np.asarray(G.v, dtype=float)
        for w in seq.times:
            wait(w - tau_p / 2 - t)
            rep.append((tau_p * delta, z, *v))
            t = w + tau_p / 2

    period = drift_period(lam)
    if period is not None:
        pad = (drift_time - t) % period
        if pad > 1e-12 * period and period - pad > 1e-12 * period:
            wait(pad)
            t += pad

    control = ReparametrizedControl(np.array(rep, dtype=float).reshape(-1, 5), delta)
    lab = reparametrize(control) if rep else PiecewiseControl(np.zeros((0, 4)), delta)
    error = math.nan
    if simulate:
        L = propagator_matrix(ops, lab)
        T = lab.total_time
        y = np.exp(-1j * lam * T)[:, None] * L
        target = np.exp(-1j * lam * drift_time)[:, None] * path_propagator(ops, path)
        error = float(np.linalg.norm(y - target, 2))
    return TrackingResult(control, lab, error, sequences, staircase, drift_time)
