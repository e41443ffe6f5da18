import numpy as np
import pytest

from blocktrack.control import (
    TRACE_COLUMNS,
    ControllerGains,
    EffectorState,
    closed_loop_matrix,
    control_wrench,
    discrete_loop_matrix,
    plant_step,
    trace_row,
)
from blocktrack.errors import DivergedPlantError, InvalidStateError
from blocktrack.se3 import Pose, quat_from_axis_angle, random_pose

DEFAULT = ControllerGains.isotropic()


def simulate(gains, desired_at, state, duration, dt=1e-3):
    errors = []
    for k in range(int(round(duration / dt))):
        d = desired_at(k * dt)
        errors.append(np.r_[d.translation - state.pose.translation])
        state = plant_step(state, control_wrench(gains, d, state), 1.0, 1.0, dt)
    return state, np.array(errors)


class TestGains:
    def test_not_symmetric(self):
        kp = np.eye(6)
        kp[0, 1] = 0.5
        with pytest.raises(InvalidStateError):
            ControllerGains(kp, np.eye(6))

    def test_not_positive_definite(self):
        with pytest.raises(InvalidStateError):
            ControllerGains(np.eye(6), -np.eye(6))

    def test_shape(self):
        with pytest.raises(InvalidStateError):
            ControllerGains(np.eye(3), np.eye(3))


class TestWrench:
    def test_zero_at_setpoint(self):
        p = random_pose(np.random.default_rng(0))
        np.testing.assert_allclose(control_wrench(DEFAULT, p, EffectorState.at_rest(p)), 0.0, atol=1e-12)

    def test_stiffness(self):
        gains = ControllerGains.isotropic(100.0, 1.0)
        w = control_wrench(gains, Pose.from_translation([0.1, 0, 0]), EffectorState.at_rest(Pose.identity()))
        np.testing.assert_allclose(w, [10, 0, 0, 0, 0, 0], atol=1e-14)

    def test_damping(self):
        gains = ControllerGains.isotropic(1.0, 50.0)
        w = control_wrench(gains, Pose.identity(), EffectorState(Pose.identity(), [0, 0, 0.2, 0, 0, 0]))
        np.testing.assert_allclose(w, [0, 0, -10, 0, 0, 0], atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.5, 2.0, -3.0])
    def test_linear_in_error_and_velocity(self, alpha):
        rng = np.random.default_rng(1)
        e, v = rng.standard_normal(3), rng.standard_normal(6)
        w1 = control_wrench(DEFAULT, Pose.from_translation(e), EffectorState(Pose.identity(), v))
        w2 = control_wrench(DEFAULT, Pose.from_translation(alpha * e), EffectorState(Pose.identity(), alpha * v))
        np.testing.assert_allclose(w2, alpha * w1, rtol=1e-14, atol=1e-13)


class TestPlant:
    def test_zero_wrench_at_rest(self):
        s = EffectorState.at_rest(random_pose(np.random.default_rng(2)))
        out = plant_step(s, np.zeros(6), 1.0, 1.0, 1e-3)
        assert out.pose.allclose(s.pose, 1e-15)
        np.testing.assert_array_equal(out.velocity, 0.0)

    def test_constant_force(self):
        s = EffectorState.at_rest(Pose.identity())
        for _ in range(1000):
            s = plant_step(s, [1.0, 0, 0, 0, 0, 0], 1.0, 1.0, 1e-3)
        assert s.velocity[0] == pytest.approx(1.0, rel=1e-12)
        assert s.pose.translation[0] == pytest.approx(0.5, rel=2e-3)

    def test_constant_spin(self):
        s = EffectorState(Pose.identity(), [0, 0, 0, 0, 0, 1.0])
        for _ in range(500):
            s = plant_step(s, np.zeros(6), 1.0, 1.0, 1e-3)
        np.testing.assert_allclose(s.pose.rotation, quat_from_axis_angle([0, 0, 1], 0.5), atol=1e-12)

    @pytest.mark.parametrize("kw", [{"dt": 0.0}, {"mass": 0.0}, {"inertia": -1.0}])
    def test_invalid(self, kw):
        args = {"mass": 1.0, "inertia": 1.0, "dt": 1e-3} | kw
        with pytest.raises(InvalidStateError):
            plant_step(EffectorState.at_rest(Pose.identity()), np.zeros(6), **args)

    def test_diverged(self):
        with pytest.raises(DivergedPlantError), np.errstate(over="ignore", invalid="ignore"):
            plant_step(EffectorState.at_rest(Pose.identity()), [1e308, 0, 0, 0, 0, 0], 1e-10, 1.0, 1e-3)


class TestClosedLoop:
    def test_continuous_eigenvalues(self):
        ev = np.linalg.eigvals(closed_loop_matrix(DEFAULT, 1.0, 1.0))
        assert ev.real.max() < 0
        # critically damped: double pole at -20
        np.testing.assert_allclose(ev, -20.0, atol=1e-5)

    def test_discrete_spectral_radius(self):
        assert max(abs(np.linalg.eigvals(discrete_loop_matrix(DEFAULT, 1.0, 1.0, 1e-3)))) < 1

    def test_static_setpoint_convergence(self):
        target = Pose(quat_from_axis_angle([1, 1, 0], 0.3), [0.2, -0.1, 0.05])
        state, errors = simulate(DEFAULT, lambda t: target, EffectorState.at_rest(Pose.identity()), 2.0)
        mag = np.linalg.norm(errors, axis=1)
        peak = int(np.argmax(mag))
        assert np.all(np.diff(mag[peak:]) <= 1e-15)
        assert np.linalg.norm(target.translation - state.pose.translation) < 1e-4
        assert np.linalg.norm(state.velocity) < 1e-3

    def test_sinusoid_periodic_error(self):
        period = 2.0
        w = 2 * np.pi / period

        def desired(t):
            return Pose(quat_from_axis_angle([0, 0, 1], 0.2 * np.sin(w * t)), [0.1 * np.sin(w * t), 0.0, 0.05 * np.cos(w * t)])

        _, errors = simulate(DEFAULT, desired, EffectorState.at_rest(desired(0.0)), 5 * period)
        n = int(round(period / 1e-3))
        last, prev = errors[-n:], errors[-2 * n : -n]
        # PD without feed-forward lags by about kd * v / kp
        assert np.abs(last).max() < 1.2 * 40 * 0.1 * w / 400
        assert np.abs(last - prev).max() / np.abs(last).max() < 1e-6


def test_trace_row():
    row = trace_row(0.5, Pose.identity(), EffectorState.at_rest(Pose.identity()), np.arange(6.0), "{:.3f}")
    assert len(row) == len(TRACE_COLUMNS) == 21
    assert row[:5] == ["0.500", "0.000", "0.000", "0.000", "1.000"]
    assert row[-1] == "5.000"
