"""Dynamics of the suspended block as a 5-DoF unactuated pendulum.

Kinematic convention (pivot frame, z up):

* q1 rotates the cable about the pivot x-axis, q2 about the rotated y-axis.
  The attachment point sits at distance ``cable_length`` along -z of the
  resulting cable frame.
* The block frame relative to the cable frame is Rz(q5) Ry(q4) Rx(q3)
  (yaw q5, pitch q4, roll q3), so q5 spins the block about the cable.
* The COG lies ``cog_offset`` below the attachment along the block's -z.

The equations of motion B(q) q'' + C(q, q') q' + g(q) = 0 follow from the
Lagrangian of that chain; see ``_kernels`` for the compiled evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from blocktrack import _kernels
from blocktrack.errors import (
    EnvelopeExceededError,
    InvalidStateError,
    SingularConfigurationError,
)
from blocktrack.se3 import Pose, quat_to_matrix

MAX_CONDITION = 1e12
MAX_STEP = 0.1
CABLE_ANGLE_LIMIT = np.pi / 2


def cuboid_inertia(mass: float, dims) -> np.ndarray:
    """Inertia tensor at the COG of a uniform box with extents (x, y, z)."""
    a, b, c = dims
    return np.diag(
        [mass * (b * b + c * c) / 12.0, mass * (a * a + c * c) / 12.0, mass * (a * a + b * b) / 12.0]
    )


@dataclass(frozen=True, eq=False)
class PendulumParams:
    """Physical parameters of the block and cable.

    ``block_dims`` are the box extents along the block x, y and z axes, with z
    vertical. When ``inertia`` is omitted it is filled from the uniform-density
    cuboid formula.
    """

    mass: float = 22.0
    cable_length: float = 1.215
    block_dims: tuple = (0.8, 0.6, 0.2)
    cog_offset: float = 0.1
    inertia: np.ndarray = field(default=None)
    gravity: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "block_dims", tuple(float(v) for v in self.block_dims))
        inertia = self.inertia
        if inertia is None:
            inertia = cuboid_inertia(self.mass, self.block_dims)
        inertia = np.array(inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        inertia.flags.writeable = False
        object.__setattr__(self, "inertia", inertia)

        if not self.mass > 0:
            raise InvalidStateError("mass must be positive")
        if not self.cable_length > 0:
            raise InvalidStateError("cable_length must be positive")
        if not self.gravity > 0:
            raise InvalidStateError("gravity must be positive")
        if not self.cog_offset >= 0:
            raise InvalidStateError("cog_offset must be non-negative")
        if inertia.shape != (3, 3) or not np.all(np.isfinite(inertia)):
            raise InvalidStateError("inertia must be a finite 3x3 matrix")
        if not np.allclose(inertia, inertia.T, rtol=0, atol=1e-12 * np.abs(inertia).max()):
            raise InvalidStateError("inertia must be symmetric")
        if np.linalg.eigvalsh(inertia)[0] <= 0:
            raise InvalidStateError("inertia must be positive definite")

    def _args(self):
        return self.mass, self.cable_length, self.cog_offset, self.gravity, self.inertia

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "cable_length": self.cable_length,
            "block_dims": list(self.block_dims),
            "cog_offset": self.cog_offset,
            "inertia": self.inertia.tolist(),
            "gravity": self.gravity,
        }


@dataclass(frozen=True, eq=False)
class PendulumState:
    """Generalized coordinates ``q`` (rad) and velocities ``qdot`` (rad/s)."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(5)
        qdot = np.array(self.qdot, dtype=float).reshape(5)
        q.flags.writeable = False
        qdot.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @classmethod
    def from_vector(cls, x) -> PendulumState:
        x = np.asarray(x, dtype=float)
        if x.shape != (10,):
            raise InvalidStateError(f"state vector must have 10 entries, got shape {x.shape}")
        return cls(x[:5], x[5:])

    @classmethod
    def at_rest(cls, q=None) -> PendulumState:
        return cls(np.zeros(5) if q is None else q, np.zeros(5))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.q.sum() + self.qdot.sum()))

    def in_envelope(self) -> bool:
        return bool(abs(self.q[0]) < CABLE_ANGLE_LIMIT and abs(self.q[1]) < CABLE_ANGLE_LIMIT)


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    B: np.ndarray
    C: np.ndarray
    grav: np.ndarray


def _check_state(state: PendulumState) -> np.ndarray:
    if not state.is_finite():
        raise InvalidStateError("pendulum state contains non-finite values")
    if not state.in_envelope():
        raise InvalidStateError(f"cable angles outside the validity envelope: q={state.q[:2]}")
    return state.as_vector()


def _check_inertia(B: np.ndarray) -> None:
    cond = _kernels.condition_number(B)
    if not cond <= MAX_CONDITION:
        raise SingularConfigurationError(f"inertia matrix condition number {cond:.3g} exceeds {MAX_CONDITION:g}", cond)


def dynamics_terms(params: PendulumParams, state: PendulumState) -> DynamicsTerms:
    """Inertia, Coriolis (Christoffel construction) and gravity terms at ``state``."""
    _check_state(state)
    m, L, d, g, inertia = params._args()
    B, _, C, grav = _kernels.dynamics_terms(state.q, state.qdot, m, L, d, g, inertia)
    _check_inertia(B)
    B = 0.5 * (B + B.T)
    return DynamicsTerms(B=B, C=C, grav=grav)


def inertia_partials(params: PendulumParams, state: PendulumState) -> np.ndarray:
    """dB/dq_i stacked along the first axis, shape (5, 5, 5)."""
    _check_state(state)
    m, L, d, g, inertia = params._args()
    return _kernels.dynamics_terms(state.q, state.qdot, m, L, d, g, inertia)[1]


def continuous_dynamics(params: PendulumParams, state: PendulumState) -> np.ndarray:
    x = _check_state(state)
    m, L, d, g, inertia = params._args()
    qdd, B = _kernels.acceleration(x[:5], x[5:], m, L, d, g, inertia)
    _check_inertia(B)
    return np.concatenate([x[5:], qdd])


def observe_pose(params: PendulumParams, state: PendulumState) -> Pose:
    """Pose of the block COG in the pivot frame."""
    _check_state(state)
    y = _kernels.observe(state.q, params.cable_length, params.cog_offset)
    return Pose(y[3:], y[:3])


def observe_vector(params: PendulumParams, x: np.ndarray) -> np.ndarray:
    """``observe_pose`` as the raw 7-vector (tx, ty, tz, qw, qx, qy, qz), no validation."""
    return _kernels.observe(np.ascontiguousarray(x[:5], dtype=float), params.cable_length, params.cog_offset)


def step(params: PendulumParams, state: PendulumState, dt: float) -> PendulumState:
    """One classical RK4 step of length ``dt``."""
    if not 0 < dt <= MAX_STEP:
        raise InvalidStateError(f"dt must lie in (0, {MAX_STEP}], got {dt}")
    x = _check_state(state)
    m, L, d, g, inertia = params._args()
    _check_inertia(_kernels.mass_matrix(state.q, m, L, d, inertia))
    nxt = PendulumState.from_vector(_kernels.rk4(x, dt, m, L, d, g, inertia))
    if not nxt.is_finite() or not nxt.in_envelope():
        raise EnvelopeExceededError(f"step left the validity envelope: q={nxt.q}", nxt)
    return nxt


def step_vector(params: PendulumParams, x: np.ndarray, dt: float) -> np.ndarray:
    """``step`` on a raw 10-vector; dt = 0 returns a copy."""
    if dt == 0:
        return np.array(x, dtype=float)
    return step(params, PendulumState.from_vector(x), dt).as_vector()


def state_jacobian(params: PendulumParams, state: PendulumState, dt: float) -> np.ndarray:
    """d step / d x, 10x10, exact to rounding (complex-step through the RK4 stages)."""
    x = _check_state(state)
    if dt == 0:
        return np.eye(10)
    if not 0 < dt <= MAX_STEP:
        raise InvalidStateError(f"dt must lie in [0, {MAX_STEP}], got {dt}")
    m, L, d, g, inertia = params._args()
    _check_inertia(_kernels.mass_matrix(state.q, m, L, d, inertia))
    return _kernels.rk4_jacobian(x, dt, m, L, d, g, inertia)


def output_jacobian(params: PendulumParams, state: PendulumState) -> np.ndarray:
    """d observe / d x, 7x10; velocity columns are zero."""
    _check_state(state)
    C = np.zeros((7, 10))
    C[:, :5] = _kernels.observe_jacobian(state.q, params.cable_length, params.cog_offset)
    return C


def total_energy(params: PendulumParams, state: PendulumState) -> float:
    """Kinetic plus gravitational potential energy, zero at the hanging rest state."""
    x = _check_state(state)
    return float(_kernels.energy(x, *params._args()))


def coordinates_from_pose(params: PendulumParams, pose: Pose) -> np.ndarray:
    """Generalized coordinates whose ``observe_pose`` best matches ``pose``.

    Exact for consistent poses. For noisy poses the cable direction is
    renormalised, so the returned angles are a least-distortion fit.
    """
    Rb = quat_to_matrix(pose.rotation)
    attach = pose.translation + params.cog_offset * Rb[:, 2]
    u = attach / np.linalg.norm(attach)
    q2 = np.arcsin(np.clip(-u[0], -1.0, 1.0))
    q1 = np.arctan2(u[1], -u[2])
    c1, s1, c2, s2 = np.cos(q1), np.sin(q1), np.cos(q2), np.sin(q2)
    Rc = np.array([[c2, 0.0, s2], [s1 * s2, c1, -s1 * c2], [-c1 * s2, s1, c1 * c2]])
    Rrel = Rc.T @ Rb
    q4 = -np.arcsin(np.clip(Rrel[2, 0], -1.0, 1.0))
    q5 = np.arctan2(Rrel[1, 0], Rrel[0, 0])
    q3 = np.arctan2(Rrel[2, 1], Rrel[2, 2])
    return np.array([q1, q2, q3, q4, q5])


def propagate(params: PendulumParams, state: PendulumState, duration: float, max_step: float = 1e-3) -> PendulumState:
    """Advance by ``duration`` with equal RK4 substeps no longer than ``max_step``.

    Equivalent to repeated :func:`step` with the loop compiled, except that
    the inertia conditioning is checked once, at the initial state.
    """
    if duration == 0:
        return state
    if not duration > 0 or not 0 < max_step <= MAX_STEP:
        raise InvalidStateError(f"need duration >= 0 and max_step in (0, {MAX_STEP}]")
    x = _check_state(state)
    n = max(1, int(np.ceil(duration / max_step - 1e-9)))
    m, L, d, g, inertia = params._args()
    _check_inertia(_kernels.mass_matrix(state.q, m, L, d, inertia))
    x, ok = _kernels.rk4_many(x, duration / n, n, m, L, d, g, inertia, CABLE_ANGLE_LIMIT)
    nxt = PendulumState.from_vector(x)
    if not ok:
        raise EnvelopeExceededError(f"step left the validity envelope: q={nxt.q}", nxt)
    return nxt
