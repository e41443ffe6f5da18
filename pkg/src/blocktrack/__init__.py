"""Tracking a suspended, swinging block with an eye-to-hand camera.

Modules: ``pendulum`` (block dynamics), ``se3`` (rigid transforms), ``ekf``
(filter with intermittent observations), ``camera`` (sensor simulation),
``handeye`` (AX = XB calibration), ``control`` (task-space PD law) and
``harness`` (multirate scenario runner, also exposed through the CLI).
"""

from blocktrack.config import ScenarioConfig, load_scenario, preset
from blocktrack.ekf import Belief, IntermittentEKF, Measurement, NoiseConfig
from blocktrack.harness import RunMetrics, compare_runs, rmse, run_scenario
from blocktrack.pendulum import PendulumParams, PendulumState
from blocktrack.se3 import Pose, compose, invert

__all__ = [
    "Belief",
    "IntermittentEKF",
    "Measurement",
    "NoiseConfig",
    "PendulumParams",
    "PendulumState",
    "Pose",
    "RunMetrics",
    "ScenarioConfig",
    "compare_runs",
    "compose",
    "invert",
    "load_scenario",
    "preset",
    "rmse",
    "run_scenario",
]

__version__ = "0.1.0"
