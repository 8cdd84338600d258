"""Constructive control design: gaps, phase sequences, tracking, planning and steering."""

from .gaps import GapGenerator, SpectralGapSet, gap_generator, spectral_gaps
from .phases import PhaseSequence, averages, nu_bounds, nu_constant, nu_value, phase_sequence
from .planning import (
    ControlPlan,
    PlanningError,
    PlanSegment,
    RotationTree,
    phase_insensitive_distance,
    plan_state_transfer,
    plan_unitary,
    realize,
    rotation_tree,
)
from .steering import SteeringAttempt, SteeringError, SteeringResult, steer_state
from .tracking import PathSegment, TrackingResult, drift_period, path_propagator, tracking_control

__all__ = [
    "ControlPlan",
    "GapGenerator",
    "PathSegment",
    "PhaseSequence",
    "PlanSegment",
    "PlanningError",
    "RotationTree",
    "SpectralGapSet",
    "SteeringAttempt",
    "SteeringError",
    "SteeringResult",
    "TrackingResult",
    "averages",
    "drift_period",
    "gap_generator",
    "nu_bounds",
    "nu_constant",
    "nu_value",
    "path_propagator",
    "phase_insensitive_distance",
    "phase_sequence",
    "plan_state_transfer",
    "plan_unitary",
    "realize",
    "rotation_tree",
    "spectral_gaps",
    "steer_state",
    "tracking_control",
]
