"""Task-space PD tracking law on a gravity-compensated Cartesian end-effector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from blocktrack.errors import DivergedPlantError, InvalidStateError
from blocktrack.se3 import Pose, pose_error, quat_from_rotvec, quat_multiply

TRACE_COLUMNS = (
    ["t"]
    + [f"des_{c}" for c in ("tx", "ty", "tz", "qw", "qx", "qy", "qz")]
    + [f"cur_{c}" for c in ("tx", "ty", "tz", "qw", "qx", "qy", "qz")]
    + ["fx", "fy", "fz", "mx", "my", "mz"]
)


def _check_spd(name: str, M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.shape != (6, 6):
        raise InvalidStateError(f"{name} must be 6x6, got {M.shape}")
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise InvalidStateError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise InvalidStateError(f"{name} must be positive definite") from exc
    M.flags.writeable = False
    return M


@dataclass(frozen=True, eq=False)
class ControllerGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kp", _check_spd("kp", self.kp))
        object.__setattr__(self, "kd", _check_spd("kd", self.kd))

    @classmethod
    def isotropic(cls, kp: float = 400.0, kd: float = 40.0) -> ControllerGains:
        return cls(kp * np.eye(6), kd * np.eye(6))


@dataclass(frozen=True, eq=False)
class EffectorState:
    """End-effector pose and twist (linear m/s, angular rad/s, both in the base frame)."""

    pose: Pose
    velocity: np.ndarray

    def __post_init__(self):
        v = np.array(self.velocity, dtype=float).reshape(6)
        if not np.isfinite(v.sum()):
            raise InvalidStateError("effector velocity contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "velocity", v)

    @classmethod
    def at_rest(cls, pose: Pose) -> EffectorState:
        return cls(pose, np.zeros(6))


def control_wrench(gains: ControllerGains, desired: Pose, state: EffectorState) -> np.ndarray:
    """K_P * pose_error(desired, current) - K_D * velocity (J = I, gravity compensated)."""
    return gains.kp @ pose_error(desired, state.pose) - gains.kd @ state.velocity


def plant_step(state: EffectorState, wrench, mass: float, inertia: float, dt: float) -> EffectorState:
    """Semi-implicit Euler step of a free rigid body with isotropic inertia."""
    if not dt > 0:
        raise InvalidStateError("dt must be positive")
    if not (mass > 0 and inertia > 0):
        raise InvalidStateError("mass and inertia must be positive")
    wrench = np.asarray(wrench, dtype=float)
    v = state.velocity[:3] + dt * wrench[:3] / mass
    w = state.velocity[3:] + dt * wrench[3:] / inertia
    p = state.pose.translation + dt * v
    q = quat_multiply(quat_from_rotvec(dt * w), state.pose.rotation)
    if not np.isfinite(v.sum() + w.sum() + p.sum() + q.sum()):
        raise DivergedPlantError("effector plant produced non-finite values")
    return EffectorState(Pose(q, p), np.concatenate([v, w]))


def closed_loop_matrix(gains: ControllerGains, mass: float, inertia: float) -> np.ndarray:
    """Continuous-time linearisation of the loop about a static setpoint, state (error, velocity)."""
    Minv = np.diag([1.0 / mass] * 3 + [1.0 / inertia] * 3)
    return np.block([[np.zeros((6, 6)), np.eye(6)], [-Minv @ gains.kp, -Minv @ gains.kd]])


def discrete_loop_matrix(gains: ControllerGains, mass: float, inertia: float, dt: float) -> np.ndarray:
    """The same loop under the semi-implicit Euler update used by ``plant_step``."""
    Minv = np.diag([1.0 / mass] * 3 + [1.0 / inertia] * 3)
    Kp = Minv @ gains.kp
    Kd = Minv @ gains.kd
    I = np.eye(6)
    # v+ = v + dt(-Kp x - Kd v); x+ = x + dt v+
    Av = np.hstack([-dt * Kp, I - dt * Kd])
    Ax = np.hstack([I, np.zeros((6, 6))]) + dt * Av
    return np.vstack([Ax, Av])


def trace_row(t: float, desired: Pose, state: EffectorState, wrench, fmt: str = "{:.9f}") -> list[str]:
    vals = [t, *desired.as_vector(), *state.pose.as_vector(), *wrench]
    return [fmt.format(v) for v in vals]
