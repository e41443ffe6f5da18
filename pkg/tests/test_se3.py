import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocktrack.errors import InvalidStateError
from blocktrack.se3 import (
    Pose,
    block_pose_in_base,
    canonical_quat,
    compose,
    compose_all,
    desired_pose_in_base,
    invert,
    matrix_to_quat,
    pose_error,
    quat_distance_angle,
    quat_from_axis_angle,
    quat_rotate,
    quat_to_matrix,
    random_pose,
    random_quat,
)

ID = Pose.identity()


def homogeneous(p: Pose) -> np.ndarray:
    """Reference 4x4 built straight from the rotation-matrix formula."""
    w, x, y, z = p.rotation
    R = np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    )
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p.translation
    return T


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def poses(seed, n=1):
    rng = np.random.default_rng(seed)
    return [random_pose(rng) for _ in range(n)]


class TestPoseConstruction:
    def test_renormalises_and_canonicalises(self):
        p = Pose([-2.0, 0.0, 0.0, 0.0], [0, 0, 0])
        np.testing.assert_array_equal(p.rotation, [1.0, 0.0, 0.0, 0.0])

    def test_zero_w_tie_break(self):
        assert canonical_quat(np.array([0.0, -1.0, 0.0, 0.0]))[1] == 1.0

    @pytest.mark.parametrize("bad", [[np.nan, 0, 0, 0], [0, 0, 0, 0]])
    def test_rejects_bad_rotation(self, bad):
        with pytest.raises(InvalidStateError):
            Pose(bad, [0, 0, 0])

    def test_rejects_nonfinite_translation(self):
        with pytest.raises(InvalidStateError):
            Pose([1, 0, 0, 0], [0, np.inf, 0])

    def test_vector_round_trip(self):
        p = poses(3)[0]
        v = p.as_vector()
        assert v.shape == (7,)
        np.testing.assert_array_equal(Pose.from_vector(v).as_vector(), v)

    def test_immutable_arrays(self):
        with pytest.raises(ValueError):
            ID.translation[0] = 1.0


class TestCompose:
    def test_identity_left(self):
        t = poses(1)[0]
        assert compose(ID, t).allclose(t)

    def test_inverse(self):
        t = poses(2)[0]
        assert compose(t, invert(t)).allclose(ID, 1e-12)

    def test_hand_computed(self):
        a = Pose(quat_from_axis_angle([0, 0, 1], np.pi / 2), [1, 0, 0])
        b = Pose.from_translation([1, 0, 0])
        c = compose(a, b)
        np.testing.assert_allclose(c.translation, [1, 1, 0], atol=1e-15)
        assert quat_distance_angle(c.rotation, a.rotation) < 1e-15

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_matches_homogeneous_product(self, seed):
        a, b = poses(seed, 2)
        np.testing.assert_allclose(homogeneous(compose(a, b)), homogeneous(a) @ homogeneous(b), atol=1e-12)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_associative(self, seed):
        a, b, c = poses(seed, 3)
        assert compose(compose(a, b), c).allclose(compose(a, compose(b, c)), 1e-12)


class TestInvert:
    def test_identity(self):
        assert invert(ID).allclose(ID, 0.0)

    def test_pure_translation(self):
        np.testing.assert_array_equal(invert(Pose.from_translation([1, 2, 3])).translation, [-1, -2, -3])

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_involution(self, seed):
        t = poses(seed)[0]
        assert invert(invert(t)).allclose(t, 1e-12)


class TestRotationConversions:
    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_matrix_orthonormal(self, seed):
        R = quat_to_matrix(random_quat(np.random.default_rng(seed)))
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, seed):
        q = random_quat(np.random.default_rng(seed))
        np.testing.assert_allclose(matrix_to_quat(quat_to_matrix(q)), q, atol=1e-12)

    @pytest.mark.parametrize("axis", [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    def test_round_trip_near_pi(self, axis):
        q = quat_from_axis_angle(axis, np.pi - 1e-9)
        assert quat_distance_angle(matrix_to_quat(quat_to_matrix(q)), q) < 1e-12

    def test_rotate_matches_matrix(self):
        rng = np.random.default_rng(5)
        q = random_quat(rng)
        v = rng.standard_normal(3)
        np.testing.assert_allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-14)


class TestFrameChains:
    def test_all_identity(self):
        assert block_pose_in_base(ID, ID, ID).allclose(ID, 0.0)

    def test_pure_translation_board_block(self):
        base_camera, camera_board = poses(11, 2)
        offset = np.array([0.0, 0.3, -0.05])
        out = block_pose_in_base(base_camera, camera_board, Pose.from_translation(offset))
        chain = compose(base_camera, camera_board)
        np.testing.assert_allclose(out.translation, chain.transform_point(offset), atol=1e-14)
        assert quat_distance_angle(out.rotation, chain.rotation) < 1e-14

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_fold_equivalence(self, seed):
        a, b, c = poses(seed, 3)
        assert block_pose_in_base(a, b, c).allclose(compose_all(a, b, c), 1e-12)

    def test_desired_identity_offset(self):
        t = poses(4)[0]
        assert desired_pose_in_base(t, ID).allclose(t, 1e-15)

    def test_desired_side_offset(self):
        block = Pose.from_translation([1.0, -0.5, 0.7])
        des = desired_pose_in_base(block, Pose.from_translation([0.4, 0, 0]))
        np.testing.assert_allclose(des.translation, [1.4, -0.5, 0.7], atol=1e-15)

    def test_desired_matches_compose(self):
        a, b = poses(8, 2)
        assert desired_pose_in_base(a, b).allclose(compose(a, b), 1e-15)


class TestPoseError:
    def test_zero_when_equal(self):
        t = poses(6)[0]
        np.testing.assert_allclose(pose_error(t, t), np.zeros(6), atol=1e-15)

    def test_position_offset(self):
        q = random_quat(np.random.default_rng(0))
        e = pose_error(Pose(q, [0.1, 0, 0]), Pose(q, [0, 0, 0]))
        np.testing.assert_allclose(e, [0.1, 0, 0, 0, 0, 0], atol=1e-16)

    def test_small_rotation(self):
        d = Pose(quat_from_axis_angle([0, 0, 1], 1e-3), [0, 0, 0])
        np.testing.assert_allclose(pose_error(d, ID), [0, 0, 0, 0, 0, 1e-3], atol=1e-6)

    def test_double_cover(self):
        # the raw quaternion -q must give zero error against q
        q = random_quat(np.random.default_rng(9))
        e = pose_error(Pose(-q, [0, 0, 0]), Pose(q, [0, 0, 0]))
        np.testing.assert_allclose(e, np.zeros(6), atol=1e-15)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_nonzero_when_different(self, seed):
        a, b = poses(seed, 2)
        assert np.linalg.norm(pose_error(a, b)) > 0
