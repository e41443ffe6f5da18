"""Multirate simulation of the camera -> EKF -> controller pipeline.

One discrete clock ticks at the least common multiple of the camera, filter
and controller rates. Within a tick the order is camera, filter, controller.
The ground truth is integrated lazily up to each tick at which something
happens, with RK4 substeps no longer than ``truth_max_step``.

Camera samples are folded into the filter at their own timestamps: the
belief is predicted to the sample time, corrected, then predicted on to the
filter tick. Filter ticks with no new sample are prediction-only (gamma = 0).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from blocktrack import pendulum
from blocktrack.camera import MEASUREMENT_COLUMNS, corrupt, measurement_row, sample_schedule
from blocktrack.config import ScenarioConfig
from blocktrack.control import TRACE_COLUMNS, EffectorState, control_wrench, plant_step, trace_row
from blocktrack.ekf import Belief, IntermittentEKF, Measurement, NoiseConfig, pendulum_output, pendulum_plant
from blocktrack.errors import BlockTrackError, ConfigError, ScenarioError, ShapeError
from blocktrack.se3 import (
    Pose,
    block_pose_in_base,
    compose,
    desired_pose_in_base,
    invert,
    quat_distance_angle,
)

FLOAT_FMT = "{:.9e}"
STATE_NAMES = [f"q{i}" for i in range(1, 6)] + [f"qd{i}" for i in range(1, 6)]
POSE_NAMES = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"]
TRUTH_COLUMNS = ["t"] + STATE_NAMES + POSE_NAMES
ESTIMATE_COLUMNS = ["t"] + STATE_NAMES + [f"P_{n}" for n in STATE_NAMES] + POSE_NAMES

METRIC_FIELDS = ("est_rmse_pos", "est_rmse_q", "track_rmse_pos", "gamma_count", "wall_time")


@dataclass
class RunMetrics:
    est_rmse_pos: float
    est_rmse_q: float
    track_rmse_pos: float
    gamma_count: int
    wall_time: float
    meas_rmse_pos: float = 0.0
    scheduled_samples: int = 0
    ekf_ticks: int = 0
    corrections: int = 0
    control_ticks: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunMetrics:
        missing = [k for k in METRIC_FIELDS if k not in data]
        if missing:
            raise ConfigError(f"metrics are missing required fields: {missing}")
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@dataclass
class RunResult:
    metrics: RunMetrics
    files: dict = field(default_factory=dict)


def rmse(a, b) -> float:
    """Root mean squared Euclidean distance between two equally shaped time series."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"series shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ShapeError("empty series")
    if a.ndim == 1:
        a = a[:, None]
        b = b[:, None]
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=-1))))


def desired_from_block(cfg: ScenarioConfig, pivot_block: Pose) -> Pose:
    """Map a block pose in the pivot frame through the camera chain to the end-effector target.

    The camera observes the board, T_camera_board; the block pose in the base
    follows from base<-camera<-board<-block, and the target from the fixed
    block<-desired offset.
    """
    fr = cfg.frames
    camera_board = compose(
        compose(invert(fr.base_camera), fr.base_pivot),
        compose(pivot_block, invert(fr.board_block)),
    )
    base_block = block_pose_in_base(fr.base_camera, camera_board, fr.board_block)
    return desired_pose_in_base(base_block, fr.block_des)


class ReferenceChain:
    """``desired_from_block`` with the constant frames folded into two fixed poses."""

    def __init__(self, cfg: ScenarioConfig):
        fr = cfg.frames
        base_camera_board = compose(fr.base_camera, compose(invert(fr.base_camera), fr.base_pivot))
        self.left = base_camera_board
        self.right = compose(compose(invert(fr.board_block), fr.board_block), fr.block_des)

    def __call__(self, pivot_block: Pose) -> Pose:
        return compose(self.left, compose(pivot_block, self.right))


def _fmt(values) -> list[str]:
    return [FLOAT_FMT.format(v) for v in values]


class _Writer:
    """CSV sink; a no-op when the run has no output directory."""

    def __init__(self, path: Optional[Path], columns):
        self.path = path
        self.rows = [] if path is not None else None
        self.columns = columns

    @property
    def active(self) -> bool:
        return self.rows is not None

    def add(self, row):
        self.rows.append(row)

    def close(self):
        if self.path is None:
            return
        with open(self.path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            w.writerows(self.rows)


def _initial_belief(cfg: ScenarioConfig, meas: Optional[Measurement], truth: pendulum.PendulumState) -> Belief:
    if cfg.ekf.init == "truth":
        mean = truth.as_vector()
    else:
        q = pendulum.coordinates_from_pose(cfg.plant, meas.pose)
        mean = np.concatenate([q, np.zeros(5)])
    return Belief(mean, cfg.ekf.initial_cov())


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Simulate the pipeline and return metrics; writes CSV traces when an output directory is given."""
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    started = time.perf_counter()

    cam_rate = int(cfg.sensor.rate)
    ekf_rate = int(cfg.ekf.rate)
    ctrl_rate = int(cfg.controller.rate)
    base = math.lcm(cam_rate, ekf_rate, ctrl_rate)
    cam_every, ekf_every, ctrl_every = base // cam_rate, base // ekf_rate, base // ctrl_rate
    n_ticks = int(math.ceil(cfg.duration * base - 1e-9))

    sched_rng, noise_rng = cfg.sensor.rngs()
    schedule = sample_schedule(cfg.sensor, cfg.duration, sched_rng)

    files = {}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {k: out / f"{k}.csv" for k in ("truth", "measurements", "estimate", "control")}
    w_truth = _Writer(files.get("truth"), TRUTH_COLUMNS)
    w_meas = _Writer(files.get("measurements"), MEASUREMENT_COLUMNS)
    w_est = _Writer(files.get("estimate"), ESTIMATE_COLUMNS)
    w_ctrl = _Writer(files.get("control"), TRACE_COLUMNS)

    params = cfg.plant
    plant_model = pendulum_plant(params)
    output_model = pendulum_output(params)
    noise = NoiseConfig(cfg.ekf.process_noise(), cfg.ekf.measurement_noise(cfg.sensor))
    ctrl = cfg.controller
    ctrl_dt = 1.0 / ctrl_rate
    chain = ReferenceChain(cfg)

    truth = cfg.initial
    truth_tick = 0
    filt: Optional[IntermittentEKF] = None
    filt_tick = 0
    pending: list[tuple[int, Measurement]] = []
    last_raw: Optional[Pose] = None
    reference: Optional[Pose] = None
    effector = EffectorState.at_rest(chain(pendulum.observe_pose(params, truth)))

    est_sq, est_ang_sq, est_n = 0.0, 0.0, 0
    meas_sq, gamma_count = 0.0, 0
    track_sq, ctrl_n = 0.0, 0
    ekf_ticks = 0

    component = "plant"
    t = 0.0
    try:
        for n in range(n_ticks):
            is_cam = n % cam_every == 0
            is_ekf = n % ekf_every == 0
            is_ctrl = n % ctrl_every == 0
            if not (is_cam or is_ekf or is_ctrl):
                continue
            t = n / base

            component = "plant"
            if n > truth_tick:
                truth = pendulum.propagate(params, truth, (n - truth_tick) / base, cfg.truth_max_step)
                truth_tick = n
            truth_pose = pendulum.observe_pose(params, truth)

            if is_cam:
                component = "camera"
                _, gamma = schedule[n // cam_every]
                if gamma:
                    measured = corrupt(truth_pose, cfg.sensor, noise_rng)
                    meas = Measurement.of_pose(t, measured)
                    pending.append((n, meas))
                    last_raw = measured
                    gamma_count += 1
                    meas_sq += float(np.sum((measured.translation - truth_pose.translation) ** 2))
                    if not cfg.use_ekf:
                        reference = chain(measured)
                else:
                    meas = Measurement.missing(t)
                if w_meas.active:
                    w_meas.add(measurement_row(meas, FLOAT_FMT))

            if is_ekf:
                component = "ekf"
                estimate: Optional[Pose] = None
                belief: Optional[Belief] = None
                if cfg.use_ekf:
                    if filt is None and (cfg.ekf.init == "truth" or pending):
                        first = pending[0][1] if pending else None
                        filt = IntermittentEKF(_initial_belief(cfg, first, truth), plant_model, output_model, noise, cfg.ekf.joseph)
                        filt_tick = pending[0][0] if (pending and cfg.ekf.init != "truth") else n
                    if filt is not None:
                        for n_c, meas in pending:
                            if n_c > filt_tick:
                                filt.predict((n_c - filt_tick) / base, (n_c - filt_tick) * ekf_rate / base)
                                filt_tick = n_c
                            filt.correct(meas)
                        if n > filt_tick:
                            filt.predict((n - filt_tick) / base, (n - filt_tick) * ekf_rate / base)
                            filt_tick = n
                        belief = filt.belief
                        estimate = Pose.from_vector(pendulum.observe_vector(params, belief.mean))
                        reference = chain(estimate)
                    pending.clear()
                else:
                    pending.clear()
                    estimate = last_raw

                ekf_ticks += 1
                if estimate is not None:
                    est_sq += float(np.sum((estimate.translation - truth_pose.translation) ** 2))
                    est_ang_sq += quat_distance_angle(estimate.rotation, truth_pose.rotation) ** 2
                    est_n += 1
                    if w_est.active:
                        if belief is not None:
                            row = _fmt([t, *belief.mean, *np.diag(belief.cov), *estimate.as_vector()])
                        else:
                            row = _fmt([t]) + [""] * 20 + _fmt(estimate.as_vector())
                        w_est.add(row)
                if w_truth.active:
                    w_truth.add(_fmt([t, *truth.q, *truth.qdot, *truth_pose.as_vector()]))

            if is_ctrl:
                component = "controller"
                desired = reference if reference is not None else effector.pose
                wrench = control_wrench(ctrl.gains, desired, effector)
                true_desired = chain(truth_pose)
                track_sq += float(np.sum((effector.pose.translation - true_desired.translation) ** 2))
                ctrl_n += 1
                if w_ctrl.active:
                    w_ctrl.add(trace_row(t, desired, effector, wrench, FLOAT_FMT))
                effector = plant_step(effector, wrench, ctrl.mass, ctrl.inertia, ctrl_dt)
    except BlockTrackError as exc:
        raise ScenarioError(t, component, exc) from exc

    for w in (w_truth, w_meas, w_est, w_ctrl):
        w.close()

    nan = float("nan")
    metrics = RunMetrics(
        est_rmse_pos=math.sqrt(est_sq / est_n) if est_n else nan,
        est_rmse_q=math.sqrt(est_ang_sq / est_n) if est_n else nan,
        track_rmse_pos=math.sqrt(track_sq / ctrl_n) if ctrl_n else nan,
        gamma_count=gamma_count,
        wall_time=time.perf_counter() - started,
        meas_rmse_pos=math.sqrt(meas_sq / gamma_count) if gamma_count else nan,
        scheduled_samples=len(schedule),
        ekf_ticks=ekf_ticks,
        corrections=filt.corrections if filt is not None else 0,
        control_ticks=ctrl_n,
    )
    if out_dir is not None:
        files["metrics"] = Path(out_dir) / "metrics.json"
        write_metrics(files["metrics"], metrics)
    return RunResult(metrics, files)


def write_metrics(path, metrics: RunMetrics) -> None:
    Path(path).write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n")


def read_metrics(path) -> RunMetrics:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: metrics must be a JSON object")
    return RunMetrics.from_dict(data)


COMPARED_FIELDS = ("est_rmse_pos", "est_rmse_q", "track_rmse_pos", "gamma_count")


@dataclass
class ComparisonReport:
    ratios: dict
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def format(self) -> str:
        lines = [f"{'field':<16}{'ratio (b/a)':>14}"]
        for k, v in self.ratios.items():
            lines.append(f"{k:<16}{v:>14.4f}")
        for k, ok in self.checks.items():
            lines.append(f"{'PASS' if ok else 'FAIL'} {k}")
        return "\n".join(lines)


def compare_runs(metrics_a, metrics_b, bounds: Optional[dict] = None) -> ComparisonReport:
    """Ratios b/a of the headline metrics, checked against upper bounds on those ratios.

    Default bound: est_rmse_pos(b) / est_rmse_pos(a) <= 2.0.
    """
    if isinstance(metrics_a, dict):
        metrics_a = RunMetrics.from_dict(metrics_a)
    if isinstance(metrics_b, dict):
        metrics_b = RunMetrics.from_dict(metrics_b)
    bounds = {"est_rmse_pos": 2.0} if bounds is None else bounds
    ratios = {}
    for k in COMPARED_FIELDS:
        a, b = getattr(metrics_a, k), getattr(metrics_b, k)
        ratios[k] = 1.0 if a == b else (b / a if a != 0 else math.inf)
    checks = {f"{k} ratio <= {v:g}": bool(ratios[k] <= v) for k, v in bounds.items()}
    return ComparisonReport(ratios, checks)


def run_checks(cfg: ScenarioConfig, metrics: RunMetrics) -> dict:
    """Pass/fail of a single run against its configured bounds.

    With an enabled filter and a noisy camera the estimate must also beat the
    raw camera (est_rmse_pos below the measured-position RMSE).
    """
    checks = {
        "metrics finite": all(
            math.isfinite(getattr(metrics, k)) for k in ("est_rmse_pos", "est_rmse_q", "track_rmse_pos")
        )
    }
    if cfg.use_ekf and cfg.sensor.pos_noise_std > 0:
        checks["est_rmse_pos < camera noise floor"] = metrics.est_rmse_pos < metrics.meas_rmse_pos
    for key, bound in cfg.bounds.items():
        name = key.removeprefix("max_")
        checks[f"{name} <= {bound:g}"] = getattr(metrics, name) <= bound
    return checks
