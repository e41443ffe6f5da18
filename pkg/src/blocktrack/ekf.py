"""Extended Kalman filter with intermittent observations.

The filter is generic over model callbacks. A correction is gated by the
binary availability flag ``gamma`` of each measurement: with gamma = 0 the
belief passes through untouched, so a missed camera frame degenerates to a
prediction-only step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from blocktrack import pendulum
from blocktrack.errors import (
    DivergedFilterError,
    InvalidStateError,
    SingularInnovationError,
    UnavailableMeasurementError,
)
from blocktrack.se3 import Pose

MAX_INNOVATION_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class Belief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise InvalidStateError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    """Process covariance ``Q`` and measurement covariance ``R``."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, dtype=float))
        R = np.atleast_2d(np.array(self.R, dtype=float))
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
                raise InvalidStateError(f"{name} must be a finite square matrix")
            if not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
                raise InvalidStateError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < -1e-12:
            raise InvalidStateError("Q must be positive semi-definite")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise InvalidStateError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True, eq=False)
class Measurement:
    """Observation ``y`` at ``timestamp`` with availability flag ``gamma``.

    ``y`` is the flat output vector (for the block, the 7-vector
    tx, ty, tz, qw, qx, qy, qz) and is None when gamma = 0.
    """

    timestamp: float
    gamma: int
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.gamma not in (0, 1):
            raise InvalidStateError(f"gamma must be 0 or 1, got {self.gamma}")
        if self.gamma == 1:
            if self.y is None:
                raise InvalidStateError("a measurement with gamma = 1 needs a value")
            y = np.array(self.y, dtype=float).reshape(-1)
            if not np.all(np.isfinite(y)):
                raise InvalidStateError("measurement contains non-finite values")
            y.flags.writeable = False
            object.__setattr__(self, "y", y)

    @classmethod
    def of_pose(cls, timestamp: float, pose: Pose) -> Measurement:
        return cls(timestamp, 1, pose.as_vector())

    @classmethod
    def missing(cls, timestamp: float) -> Measurement:
        return cls(timestamp, 0, None)

    @property
    def pose(self) -> Optional[Pose]:
        return None if self.y is None else Pose.from_vector(self.y)


def vector_residual(y: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    return y - y_pred


def pose_residual(y: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    """y - y_pred on (position, quaternion) after picking the measured sign closest to the prediction."""
    q = y[3:]
    if np.dot(q, y_pred[3:]) < 0.0:
        y = np.concatenate([y[:3], -q])
    return y - y_pred


class PlantModel(NamedTuple):
    """Discrete transition ``transition(x, dt)`` and its Jacobian ``jacobian(x, dt)``."""

    transition: Callable[[np.ndarray, float], np.ndarray]
    jacobian: Callable[[np.ndarray, float], np.ndarray]


class OutputModel(NamedTuple):
    """Output map ``output(x)``, its Jacobian, and the residual y - y_pred."""

    output: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    residual: Callable[[np.ndarray, np.ndarray], np.ndarray] = vector_residual


def linear_plant(A) -> PlantModel:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return PlantModel(lambda x, dt: A @ x, lambda x, dt: A)


def linear_output(C) -> OutputModel:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return OutputModel(lambda x: C @ x, lambda x: C)


def pendulum_plant(params: pendulum.PendulumParams) -> PlantModel:
    def transition(x, dt):
        return pendulum.step_vector(params, x, dt)

    def jacobian(x, dt):
        return pendulum.state_jacobian(params, pendulum.PendulumState.from_vector(x), dt)

    return PlantModel(transition, jacobian)


def pendulum_output(params: pendulum.PendulumParams) -> OutputModel:
    def output(x):
        pendulum._check_state(pendulum.PendulumState.from_vector(x))
        return pendulum.observe_vector(params, x)

    def jacobian(x):
        return pendulum.output_jacobian(params, pendulum.PendulumState.from_vector(x))

    return OutputModel(output, jacobian, pose_residual)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(belief: Belief, model: PlantModel, noise: NoiseConfig, dt: float, q_scale: float = 1.0) -> Belief:
    """x <- f(x), P <- A P A^T + Q with A evaluated at the prior mean.

    ``q_scale`` multiplies Q, for prediction intervals shorter than the
    nominal filter period.
    """
    A = model.jacobian(belief.mean, dt)
    mean = model.transition(belief.mean, dt)
    Q = noise.Q if q_scale == 1.0 else q_scale * noise.Q
    cov = _symmetrize(A @ belief.cov @ A.T + Q)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise DivergedFilterError("prediction produced non-finite values")
    return Belief(mean, cov)


def innovation(belief: Belief, meas: Measurement, model: OutputModel) -> np.ndarray:
    if meas.gamma != 1:
        raise UnavailableMeasurementError(f"no measurement available at t={meas.timestamp}")
    return model.residual(meas.y, model.output(belief.mean))


def correct(
    belief: Belief,
    meas: Measurement,
    model: OutputModel,
    noise: NoiseConfig,
    joseph: bool = False,
) -> Belief:
    """Gain update gated by ``meas.gamma``; gamma = 0 returns ``belief`` itself.

    The covariance follows P - K C P (resymmetrised). ``joseph=True`` switches
    to the Joseph form (I - K C) P (I - K C)^T + K R K^T.
    """
    if meas.gamma == 0:
        return belief
    P = belief.cov
    C = model.jacobian(belief.mean)
    r = innovation(belief, meas, model)
    PCt = P @ C.T
    S = _symmetrize(C @ PCt + noise.R)
    if not np.all(np.isfinite(S)):
        raise DivergedFilterError("innovation covariance is non-finite")
    cond = np.linalg.cond(S)
    if not cond <= MAX_INNOVATION_CONDITION:
        raise SingularInnovationError(f"innovation covariance condition number {cond:.3g}")
    try:
        factor = cho_factor(S)
    except LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is not positive definite") from exc
    K = cho_solve(factor, PCt.T).T
    mean = belief.mean + K @ r
    if joseph:
        IKC = np.eye(P.shape[0]) - K @ C
        cov = IKC @ P @ IKC.T + K @ noise.R @ K.T
    else:
        cov = P - K @ C @ P
    cov = _symmetrize(cov)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise DivergedFilterError("correction produced non-finite values")
    return Belief(mean, cov)


class IntermittentEKF:
    """Sequential filter state machine: one predict/correct at a time."""

    def __init__(self, belief: Belief, plant: PlantModel, output: OutputModel, noise: NoiseConfig, joseph: bool = False):
        self.belief = belief
        self.plant = plant
        self.output = output
        self.noise = noise
        self.joseph = joseph
        self.corrections = 0

    def predict(self, dt: float, q_scale: float = 1.0) -> Belief:
        self.belief = predict(self.belief, self.plant, self.noise, dt, q_scale)
        return self.belief

    def correct(self, meas: Measurement) -> Belief:
        self.belief = correct(self.belief, meas, self.output, self.noise, self.joseph)
        self.corrections += meas.gamma
        return self.belief

    def step(self, meas: Measurement, dt: float) -> Belief:
        """Predict over ``dt`` then correct with ``meas`` (the k -> k+1 recursion)."""
        self.predict(dt)
        return self.correct(meas)
