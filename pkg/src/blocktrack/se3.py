"""Rigid transforms stored as unit quaternion + translation.

Quaternions are ordered (w, x, y, z) and kept in the canonical hemisphere
w >= 0. A ``Pose`` T maps coordinates of its child frame into its parent
frame, so ``compose(a, b)`` is the homogeneous product ``a @ b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from blocktrack.errors import InvalidStateError

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def canonical_quat(q: np.ndarray) -> np.ndarray:
    """Flip q into the w >= 0 hemisphere; ties at w == 0 go to the first nonzero component > 0."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        return -q
    if q[0] == 0.0:
        for c in q[1:]:
            if c != 0.0:
                return -q if c < 0.0 else q
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 u x v, result = v + w t + u x t
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; picks the largest of (w, x, y, z) to divide by."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    diag = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return canonical_quat(q / np.linalg.norm(q))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_from_rotvec(v) -> np.ndarray:
    """Exponential map from a rotation vector (axis * angle)."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        # second-order series keeps the exponential smooth at zero
        q = np.array([1.0 - angle**2 / 8.0, *(0.5 * v)])
        return q / np.linalg.norm(q)
    return quat_from_axis_angle(v / angle, angle)


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle in [0, pi] of a unit quaternion."""
    return 2.0 * np.arctan2(np.linalg.norm(q[1:]), abs(q[0]))


def quat_distance_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle of the relative rotation between a and b, insensitive to sign."""
    return quat_angle(quat_multiply(quat_conjugate(a), b))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: unit quaternion ``rotation`` (w, x, y, z) and ``translation`` in metres."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.array(self.rotation, dtype=float).reshape(4)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.isfinite(q.sum() + t.sum()):
            raise InvalidStateError("pose contains non-finite values")
        n = np.sqrt(q @ q)
        if n < 1e-12:
            raise InvalidStateError("pose rotation quaternion has zero norm")
        q = canonical_quat(q / n)
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls(IDENTITY_QUAT, np.zeros(3))

    @classmethod
    def from_translation(cls, t) -> Pose:
        return cls(IDENTITY_QUAT, t)

    @classmethod
    def from_matrix(cls, T) -> Pose:
        T = np.asarray(T, dtype=float)
        return cls(matrix_to_quat(T[:3, :3]), T[:3, 3])

    @classmethod
    def from_vector(cls, v) -> Pose:
        """Inverse of :meth:`as_vector`: (tx, ty, tz, qw, qx, qy, qz)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (7,):
            raise InvalidStateError(f"pose vector must have 7 entries, got shape {v.shape}")
        return cls(v[3:], v[:3])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation_matrix()
        T[:3, 3] = self.translation
        return T

    def transform_point(self, p) -> np.ndarray:
        return quat_rotate(self.rotation, np.asarray(p, dtype=float)) + self.translation

    def allclose(self, other: Pose, atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
            and quat_distance_angle(self.rotation, other.rotation) <= atol
        )

    def __repr__(self):
        t = np.array2string(self.translation, precision=6)
        q = np.array2string(self.rotation, precision=6)
        return f"Pose(rotation={q}, translation={t})"


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(quat_multiply(a.rotation, b.rotation), a.transform_point(b.translation))


def invert(t: Pose) -> Pose:
    q_inv = quat_conjugate(t.rotation)
    return Pose(q_inv, -quat_rotate(q_inv, t.translation))


def compose_all(*poses: Pose) -> Pose:
    return reduce(compose, poses, Pose.identity())


def block_pose_in_base(t_base_camera: Pose, t_camera_board: Pose, t_board_block: Pose) -> Pose:
    """Block (COG) frame in the robot base: base<-camera<-board<-block."""
    return compose(compose(t_base_camera, t_camera_board), t_board_block)


def desired_pose_in_base(t_base_block: Pose, t_block_des: Pose) -> Pose:
    """End-effector target frame in the robot base."""
    return compose(t_base_block, t_block_des)


def pose_error(desired: Pose, current: Pose) -> np.ndarray:
    """6-vector (position error, orientation error) with orientation 2*vec(q_d * q_e^-1)."""
    q_err = canonical_quat(quat_multiply(desired.rotation, quat_conjugate(current.rotation)))
    return np.concatenate([desired.translation - current.translation, 2.0 * q_err[1:]])


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_quat(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation (normalised 4-D Gaussian)."""
    q = rng.standard_normal(4)
    return canonical_quat(q / np.linalg.norm(q))


def random_pose(rng: np.random.Generator, translation_scale: float = 1.0) -> Pose:
    return Pose(random_quat(rng), translation_scale * rng.standard_normal(3))
