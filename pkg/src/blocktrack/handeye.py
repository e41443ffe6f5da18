"""Eye-to-hand extrinsic calibration, AX = XB, on synthetic motion pairs.

Rotation: the quaternion form q_A q_X = q_X q_B is linear in q_X, so stacking
(L(q_A) - R(q_B)) over all pairs and taking the right singular vector of the
smallest singular value gives the least-squares rotation. Translation: stack
(R_A - I) t_X = R_X t_B - t_A and solve by linear least squares.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from blocktrack.errors import DegenerateMotionError, UnderdeterminedError
from blocktrack.se3 import (
    Pose,
    compose,
    invert,
    quat_angle,
    quat_distance_angle,
    quat_from_axis_angle,
    quat_multiply,
    quat_to_matrix,
    random_unit_vector,
)

DEGENERACY_TOL = 1e-8
MIN_MOTION_ANGLE = 0.2
MAX_MOTION_ANGLE = 1.5

STUDY_COLUMNS = ["n", "est_tx", "est_ty", "est_tz", "est_qw", "est_qx", "est_qy", "est_qz", "rot_err_rad", "trans_err_m"]


@dataclass(frozen=True)
class MotionPair:
    a: Pose  # camera-side relative motion
    b: Pose  # robot-side relative motion


def _perturb(pose: Pose, rot_noise: float, trans_noise: float, rng: np.random.Generator) -> Pose:
    axis = random_unit_vector(rng)
    angle = rot_noise * rng.standard_normal()
    q = quat_multiply(pose.rotation, quat_from_axis_angle(axis, angle))
    return Pose(q, pose.translation + trans_noise * rng.standard_normal(3))


def generate_motions(
    x_true: Pose,
    n: int,
    rot_noise: float = 0.0,
    trans_noise: float = 0.0,
    seed=0,
    translation_scale: float = 0.3,
) -> list[MotionPair]:
    """Random robot motions B_i and matching camera motions A_i = X B_i X^-1, then noise on both."""
    if n < 2:
        raise UnderdeterminedError("need at least two motions")
    rng = np.random.default_rng(seed)
    x_inv = invert(x_true)
    pairs = []
    for _ in range(n):
        angle = rng.uniform(MIN_MOTION_ANGLE, MAX_MOTION_ANGLE)
        b = Pose(quat_from_axis_angle(random_unit_vector(rng), angle), translation_scale * rng.standard_normal(3))
        a = compose(compose(x_true, b), x_inv)
        if rot_noise > 0 or trans_noise > 0:
            a = _perturb(a, rot_noise, trans_noise, rng)
            b = _perturb(b, rot_noise, trans_noise, rng)
        pairs.append(MotionPair(a, b))
    return pairs


def _left(q):
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, -z, y], [y, z, w, -x], [z, -y, x, w]])


def _right(q):
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, z, -y], [y, -z, w, x], [z, y, -x, w]])


def solve_rotation(pairs) -> np.ndarray:
    if len(pairs) < 2:
        raise UnderdeterminedError(f"need at least two motion pairs, got {len(pairs)}")
    # A and B rotate by the same angle, so both canonical (w >= 0) quaternions sit on the same sheet
    M = np.vstack([_left(p.a.rotation) - _right(p.b.rotation) for p in pairs])
    _, s, Vt = np.linalg.svd(M)
    # a one-dimensional null space needs the next-smallest singular value well away from zero
    if s[-2] < DEGENERACY_TOL * max(s[0], 1.0):
        raise UnderdeterminedError("rotation axes are parallel; AX = XB rotation is unobservable")
    return Vt[-1]


def solve_translation(pairs, q_x: np.ndarray) -> np.ndarray:
    R_x = quat_to_matrix(q_x)
    lhs = np.vstack([p.a.rotation_matrix() - np.eye(3) for p in pairs])
    rhs = np.concatenate([R_x @ p.b.translation - p.a.translation for p in pairs])
    sv = np.linalg.svd(lhs, compute_uv=False)
    if sv[-1] < DEGENERACY_TOL * max(sv[0], 1.0):
        raise DegenerateMotionError("translation system is singular")
    t, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return t


def solve_ax_xb(pairs) -> Pose:
    q_x = solve_rotation(pairs)
    return Pose(q_x, solve_translation(pairs, q_x))


def calibration_error(estimate: Pose, truth: Pose) -> tuple[float, float]:
    """(rotation angle in rad, translation distance in m) between two transforms."""
    return (
        float(quat_distance_angle(estimate.rotation, truth.rotation)),
        float(np.linalg.norm(estimate.translation - truth.translation)),
    )


def motion_residual_angle(pair: MotionPair, x: Pose) -> float:
    """Rotation angle of A X (X B)^-1."""
    lhs = quat_multiply(pair.a.rotation, x.rotation)
    rhs = quat_multiply(x.rotation, pair.b.rotation)
    return float(quat_angle(quat_multiply(lhs, np.array([rhs[0], *(-rhs[1:])]))))


@dataclass(frozen=True)
class StudyRow:
    n: int
    estimate: Pose
    rot_err: float
    trans_err: float

    def as_list(self) -> list:
        return [self.n, *self.estimate.as_vector().tolist(), self.rot_err, self.trans_err]


def convergence_study(
    x_true: Pose,
    max_n: int,
    rot_noise: float = 0.0,
    trans_noise: float = 0.0,
    seed=0,
) -> list[StudyRow]:
    """Solve on the first n pairs for n = 2..max_n."""
    if max_n < 3:
        raise UnderdeterminedError("max_n must be at least 3")
    pairs = generate_motions(x_true, max_n, rot_noise, trans_noise, seed)
    rows = []
    for n in range(2, max_n + 1):
        est = solve_ax_xb(pairs[:n])
        rot_err, trans_err = calibration_error(est, x_true)
        rows.append(StudyRow(n, est, rot_err, trans_err))
    return rows


def write_study(path, rows, fmt: str = "{:.9f}") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STUDY_COLUMNS)
        for row in rows:
            vals = row.as_list()
            w.writerow([str(vals[0])] + [fmt.format(v) for v in vals[1:]])


def convergence_trials(
    x_true: Pose,
    max_n: int,
    rot_noise: float,
    trans_noise: float,
    seed: int,
    trials: int,
) -> list[list[StudyRow]]:
    """Independent convergence studies; trial k draws from the seed sequence (seed, k)."""
    return [convergence_study(x_true, max_n, rot_noise, trans_noise, [seed, k]) for k in range(trials)]


def improvement_fractions(studies: list[list[StudyRow]], n_ref: int = 3) -> tuple[float, float]:
    """Fraction of studies whose error at the largest n is no worse than at ``n_ref``.

    Returned separately for the rotation and the translation error column.
    """
    rot = trans = 0
    for study in studies:
        ref = next(r for r in study if r.n == n_ref)
        rot += study[-1].rot_err <= ref.rot_err
        trans += study[-1].trans_err <= ref.trans_err
    return rot / len(studies), trans / len(studies)
