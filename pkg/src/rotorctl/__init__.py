"""Finite-truncation control of a polar linear rotor driven by three fields."""

from importlib import metadata

from .basis import BasisOrdering, LevelIndex, OperatorSet, build_operators, cos_theta_matrix
from .observables import ObservableReport, fidelity, orientation, shell_populations
from .propagation import PiecewiseControl, ReparametrizedControl, StateVector, propagate, reparametrize

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # pragma: no cover - source tree without install
    __version__ = "0+unknown"

__all__ = [
    "BasisOrdering",
    "LevelIndex",
    "ObservableReport",
    "OperatorSet",
    "PiecewiseControl",
    "ReparametrizedControl",
    "StateVector",
    "build_operators",
    "cos_theta_matrix",
    "fidelity",
    "orientation",
    "propagate",
    "reparametrize",
    "shell_populations",
]
