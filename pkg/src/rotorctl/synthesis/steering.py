"""State steering with bounded fields: plan, track, validate at a larger truncation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..basis import OperatorSet, build_operators
from ..propagation import PiecewiseControl, StateVector, propagate
from .planning import ControlPlan, PlanningError, phase_insensitive_distance, plan_state_transfer
from .tracking import tracking_control

H_LADDER = (64, 128, 256, 512, 1024, 2048, 4096)


@dataclass
class SteeringAttempt:
    h: int
    design_error: float
    validated_error: float | None
    leakage: float | None
    total_time: float
    seconds: float


@dataclass
class SteeringResult:
    control: PiecewiseControl
    achieved_error: float
    design_error: float = 0.0
    leakage: float = 0.0
    h: int | None = None
    n: int | None = None
    validation_ell_max: int | None = None
    plan: ControlPlan | None = field(default=None, repr=False)
    final_state: StateVector | None = field(default=None, repr=False)
    attempts: list[SteeringAttempt] = field(default_factory=list)

    def __iter__(self):
        # allows ``control, err = steer_state(...)``
        yield self.control
        yield self.achieved_error

    @property
    def total_time(self) -> float:
        return self.control.total_time

    @property
    def sup_amplitude(self) -> float:
        return self.control.sup_amplitude

    def to_dict(self) -> dict:
        return {
            "achieved_error": self.achieved_error,
            "design_error": self.design_error,
            "leakage": self.leakage,
            "h": self.h,
            "n": self.n,
            "validation_ell_max": self.validation_ell_max,
            "T": self.total_time,
            "sup_u": self.sup_amplitude,
            "segments": len(self.plan.segments) if self.plan else 0,
            "attempts": [{k: v for k, v in a.__dict__.items() if k != "seconds"} for a in self.attempts],
        }


class SteeringError(RuntimeError):
    def __init__(self, message: str, best: SteeringResult | None = None) -> None:
        super().__init__(message)
        self.best = best


def _support_shell(psi: StateVector, atol: float = 1e-12) -> int:
    idx = np.nonzero(np.abs(psi.amplitudes) > atol)[0]
    return max(psi.ordering.levels[i].ell for i in idx)


def steer_state(
    ops: OperatorSet,
    psi0: StateVector,
    psi1: StateVector,
    eps: float,
    delta: float,
    budget_seconds: float = 60.0,
    h_ladder=H_LADDER,
    validation_shells: int = 2,
    seed: int = 0,
) -> SteeringResult:
    """Lab control with ``|u_j| <= delta`` taking ``psi0`` to within ``eps`` of ``psi1`` up to phase.

    The error reported is measured at truncation ``ell_max + validation_shells``
    and so includes leakage.  Raises :class:`SteeringError` (carrying the best
    attempt) when no rung of ``h_ladder`` succeeds within the budget.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if delta <= 0:
        raise ValueError("delta must be positive")
    for psi in (psi0, psi1):
        if psi.ordering.dim != ops.dim:
            raise ValueError("states must live on the operator truncation")
    empty = PiecewiseControl(np.zeros((0, 4)), delta)
    if phase_insensitive_distance(psi1.amplitudes, psi0.amplitudes) <= 1e-14:
        return SteeringResult(empty, 0.0, n=0, final_state=psi0)

    L = max(1, _support_shell(psi0), _support_shell(psi1))
    if L >= ops.ell_max and L > 1:
        raise SteeringError(f"states reach shell {L}; no buffer shell left at ell_max={ops.ell_max}")
    n = (L + 1) ** 2
    try:
        plan = plan_state_transfer(ops, psi0, psi1, n)
    except PlanningError as exc:
        raise SteeringError(f"no constructive plan: {exc}") from exc

    big = build_operators(ops.ell_max + validation_shells, ops.ordering.ell_min)
    big0 = psi0.embed(big.ordering)
    big1 = psi1.embed(big.ordering)
    start = time.monotonic()
    best: SteeringResult | None = None
    attempts: list[SteeringAttempt] = []
    for h in h_ladder:
        if time.monotonic() - start > budget_seconds:
            break
        t0 = time.monotonic()
        try:
            track = tracking_control(ops, plan.path(ops), h, delta, simulate=False, seed=seed)
        except ValueError:
            continue  # infeasible at this h; a longer ladder rung may work
        design = phase_insensitive_distance(psi1.amplitudes, propagate(ops, psi0, track.lab).amplitudes)
        validated = leak = None
        result = None
        if design <= eps or best is None or design < best.design_error:
            final = propagate(big, big0, track.lab)
            validated = phase_insensitive_distance(big1.amplitudes, final.amplitudes)
            leak = float(np.sum(np.abs(final.amplitudes[ops.dim :]) ** 2))
            result = SteeringResult(track.lab, validated, design, leak, h, n, big.ell_max, plan, final, attempts)
        attempts.append(SteeringAttempt(h, design, validated, leak, track.total_time, time.monotonic() - t0))
        if result is not None:
            if best is None or result.achieved_error < best.achieved_error:
                best = result
            if design <= eps and validated <= eps:
                return result
    if best is None:
        raise SteeringError("no tracking control could be built within the budget")
    raise SteeringError(
        f"best achieved error {best.achieved_error:.3e} (h={best.h}) exceeds eps={eps:g}", best
    )


__all__ = ["H_LADDER", "SteeringAttempt", "SteeringError", "SteeringResult", "steer_state"]
