import csv

import numpy as np
import pytest

from blocktrack.errors import UnderdeterminedError
from blocktrack.handeye import (
    STUDY_COLUMNS,
    MotionPair,
    calibration_error,
    convergence_study,
    convergence_trials,
    generate_motions,
    improvement_fractions,
    motion_residual_angle,
    solve_ax_xb,
    write_study,
)
from blocktrack.se3 import Pose, compose, invert, quat_angle, quat_from_axis_angle, quat_to_matrix, random_pose

X_TRUE = Pose(quat_from_axis_angle([1.0, 2.0, 3.0], 0.7), [0.4, -1.1, 0.9])


class TestGenerate:
    def test_exact_relation(self):
        for p in generate_motions(X_TRUE, 20, seed=1):
            assert compose(p.a, X_TRUE).allclose(compose(X_TRUE, p.b), 1e-12)

    def test_identity_x(self):
        for p in generate_motions(Pose.identity(), 10, seed=2):
            assert p.a.allclose(p.b, 1e-12)

    def test_angle_range(self):
        angles = [quat_angle(p.b.rotation) for p in generate_motions(X_TRUE, 200, seed=3)]
        assert min(angles) >= 0.2 - 1e-12 and max(angles) <= 1.5 + 1e-12

    def test_noise_scale(self):
        pairs = generate_motions(X_TRUE, 100, rot_noise=0.005, seed=4)
        mean_resid = np.mean([motion_residual_angle(p, X_TRUE) for p in pairs])
        # two independent perturbations of rms 0.005 each, mean of a chi-type magnitude
        assert 0.002 < mean_resid < 0.015

    def test_too_few(self):
        with pytest.raises(UnderdeterminedError):
            generate_motions(X_TRUE, 1)


class TestSolve:
    @pytest.mark.parametrize("seed", range(10))
    def test_noiseless_recovery(self, seed):
        rng = np.random.default_rng(seed)
        x = random_pose(rng)
        est = solve_ax_xb(generate_motions(x, 2 + seed, seed=seed))
        rot_err, trans_err = calibration_error(est, x)
        assert rot_err < 1e-9 and trans_err < 1e-9

    def test_identity(self):
        est = solve_ax_xb(generate_motions(Pose.identity(), 5, seed=0))
        rot_err, trans_err = calibration_error(est, Pose.identity())
        assert rot_err < 1e-12 and trans_err < 1e-12

    def test_orthonormal_result(self):
        est = solve_ax_xb(generate_motions(X_TRUE, 10, 0.01, 0.01, seed=5))
        R = quat_to_matrix(est.rotation)
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-10)
        assert np.linalg.norm(est.rotation) == pytest.approx(1.0, abs=1e-12)

    def test_single_pair_underdetermined(self):
        with pytest.raises(UnderdeterminedError):
            solve_ax_xb(generate_motions(X_TRUE, 2, seed=0)[:1])

    def test_parallel_axes(self):
        pairs = []
        for angle in (0.3, 0.7, 1.1):
            b = Pose(quat_from_axis_angle([0, 0, 1], angle), [0.1 * angle, 0.2, 0.0])
            pairs.append(MotionPair(compose(compose(X_TRUE, b), invert(X_TRUE)), b))
        with pytest.raises(UnderdeterminedError):
            solve_ax_xb(pairs)

    def test_left_invariance(self):
        pairs = generate_motions(X_TRUE, 15, 0.003, 0.002, seed=6)
        Y = random_pose(np.random.default_rng(60))
        moved = [MotionPair(compose(compose(Y, p.a), invert(Y)), p.b) for p in pairs]
        x_moved = compose(Y, X_TRUE)
        e1 = calibration_error(solve_ax_xb(pairs), X_TRUE)
        e2 = calibration_error(solve_ax_xb(moved), x_moved)
        np.testing.assert_allclose(e1, e2, atol=1e-9)

    def test_monte_carlo_translation(self):
        hits = 0
        for trial in range(100):
            est = solve_ax_xb(generate_motions(X_TRUE, 50, 0.002, 0.001, seed=[99, trial]))
            hits += calibration_error(est, X_TRUE)[1] < 0.005
        assert hits >= 95


class TestStudy:
    def test_noiseless_series(self):
        rows = convergence_study(X_TRUE, 12, seed=3)
        assert [r.n for r in rows] == list(range(2, 13))
        assert max(max(r.rot_err, r.trans_err) for r in rows) < 1e-9

    def test_deterministic(self):
        a = convergence_study(X_TRUE, 8, 0.01, 0.01, seed=4)
        b = convergence_study(X_TRUE, 8, 0.01, 0.01, seed=4)
        assert [r.as_list() for r in a] == [r.as_list() for r in b]

    def test_requires_three(self):
        with pytest.raises(UnderdeterminedError):
            convergence_study(X_TRUE, 2)

    def test_settles_in_band(self):
        # x-component at max_n within 3 sigma of the truth, sigma from the trial spread
        studies = convergence_trials(X_TRUE, 30, 0.002, 0.001, seed=1, trials=100)
        finals = np.array([s[-1].estimate.translation[0] for s in studies])
        sigma = finals.std()
        assert np.mean(np.abs(finals - X_TRUE.translation[0]) <= 3 * sigma) >= 0.95
        early = np.array([s[1].estimate.translation[0] for s in studies])
        assert early.std() > sigma
        assert min(improvement_fractions(studies)) >= 0.9

    def test_csv(self, tmp_path):
        rows = convergence_study(X_TRUE, 5, 0.01, 0.01, seed=0)
        path = tmp_path / "study.csv"
        write_study(path, rows)
        with open(path) as fh:
            data = list(csv.reader(fh))
        assert data[0] == STUDY_COLUMNS
        assert [int(r[0]) for r in data[1:]] == [2, 3, 4, 5]
        assert float(data[1][1]) == pytest.approx(rows[0].estimate.translation[0], abs=1e-9)
