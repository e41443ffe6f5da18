"""Exception hierarchy shared by all blocktrack modules."""

from __future__ import annotations

import numpy as np


class BlockTrackError(Exception):
    """Base class for every error raised by the package."""


class InvalidStateError(BlockTrackError, ValueError):
    """A state, pose or parameter set contains non-finite or out-of-range values."""


class SingularConfigurationError(BlockTrackError):
    """The pendulum inertia matrix is numerically singular."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class EnvelopeExceededError(BlockTrackError):
    """An integration step left the cable-angle validity envelope."""

    def __init__(self, message: str, state):
        super().__init__(message)
        self.state = state


class DivergedFilterError(BlockTrackError):
    """The filter produced non-finite mean or covariance."""


class SingularInnovationError(BlockTrackError):
    """The innovation covariance C P C^T + R cannot be inverted reliably."""


class UnavailableMeasurementError(BlockTrackError):
    """An innovation was requested for a measurement with gamma = 0."""


class UnderdeterminedError(BlockTrackError):
    """Too few (or rotationally degenerate) motion pairs for AX = XB."""


class DegenerateMotionError(BlockTrackError):
    """The translation least-squares system of AX = XB is singular."""


class DivergedPlantError(BlockTrackError):
    """The end-effector surrogate plant produced non-finite values."""


class ShapeError(BlockTrackError, ValueError):
    """Array arguments have mismatched lengths or dimensions."""


class ConfigError(BlockTrackError, ValueError):
    """A scenario configuration or metrics file fails validation."""


class ScenarioError(BlockTrackError):
    """A module error raised inside the scenario loop, tagged with where it happened."""

    def __init__(self, timestamp: float, component: str, cause: Exception):
        super().__init__(f"{component} failed at t={timestamp:.6f}s: {cause}")
        self.timestamp = timestamp
        self.component = component
        self.cause = cause


def require_finite(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError(f"{name} contains non-finite values")
    return arr
