"""Synthetic camera: rate-limited, decimated, lossy and noisy pose measurements."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from blocktrack import pendulum
from blocktrack.ekf import Measurement
from blocktrack.errors import ConfigError
from blocktrack.se3 import Pose, quat_from_axis_angle, quat_multiply, random_unit_vector

MEASUREMENT_COLUMNS = ["timestamp", "gamma", "tx", "ty", "tz", "qw", "qx", "qy", "qz"]


@dataclass(frozen=True)
class SensorConfig:
    rate: float = 40.0
    decimation: int = 1
    drop_prob: float = 0.0
    pos_noise_std: float = 0.005
    rot_noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigError("sensor rate must be positive")
        if int(self.decimation) != self.decimation or self.decimation < 1:
            raise ConfigError("decimation must be a positive integer")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ConfigError("drop_prob must lie in [0, 1]")
        if self.pos_noise_std < 0 or self.rot_noise_std < 0:
            raise ConfigError("noise standard deviations must be non-negative")

    @property
    def effective_rate(self) -> float:
        return self.rate / self.decimation * (1.0 - self.drop_prob)

    def rngs(self) -> tuple[np.random.Generator, np.random.Generator]:
        """Independent generators for the loss schedule and the pose noise."""
        schedule, noise = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.default_rng(schedule), np.random.default_rng(noise)

    def to_dict(self) -> dict:
        return asdict(self)


def sample_count(rate: float, duration: float) -> int:
    """Number of samples k / rate falling in [0, duration)."""
    return int(math.ceil(duration * rate - 1e-9))


def sample_schedule(cfg: SensorConfig, duration: float, rng: np.random.Generator | None = None):
    """List of (timestamp, gamma) at multiples of 1/rate over [0, duration).

    A sample is kept when its index is a multiple of ``decimation`` and it
    survives an independent Bernoulli drop.
    """
    if not duration > 0:
        raise ConfigError("duration must be positive")
    if rng is None:
        rng = cfg.rngs()[0]
    n = sample_count(cfg.rate, duration)
    draws = rng.random(n)
    return [
        (k / cfg.rate, int(k % cfg.decimation == 0 and draws[k] >= cfg.drop_prob))
        for k in range(n)
    ]


def corrupt(true_pose: Pose, cfg: SensorConfig, rng: np.random.Generator) -> Pose:
    """Add Gaussian position noise and a right-composed random-axis rotation."""
    if cfg.pos_noise_std == 0 and cfg.rot_noise_std == 0:
        return true_pose
    t = true_pose.translation + cfg.pos_noise_std * rng.standard_normal(3)
    q = true_pose.rotation
    if cfg.rot_noise_std > 0:
        axis = random_unit_vector(rng)
        angle = cfg.rot_noise_std * rng.standard_normal()
        q = quat_multiply(q, quat_from_axis_angle(axis, angle))
    return Pose(q, t)


def simulate_stream(
    params: pendulum.PendulumParams,
    initial: pendulum.PendulumState,
    cfg: SensorConfig,
    duration: float,
    substeps: int = 25,
) -> list[Measurement]:
    """Integrate the block and sample the camera on its schedule.

    Between camera samples the plant is advanced with ``substeps`` RK4 steps.
    """
    sched_rng, noise_rng = cfg.rngs()
    schedule = sample_schedule(cfg, duration, sched_rng)
    period = 1.0 / cfg.rate
    state = initial
    out = []
    for k, (t, gamma) in enumerate(schedule):
        if k > 0:
            state = pendulum.propagate(params, state, period, period / substeps)
        if gamma:
            pose = corrupt(pendulum.observe_pose(params, state), cfg, noise_rng)
            out.append(Measurement.of_pose(t, pose))
        else:
            out.append(Measurement.missing(t))
    return out


def measurement_row(meas: Measurement, fmt: str = "{:.9f}") -> list[str]:
    row = [fmt.format(meas.timestamp), str(meas.gamma)]
    if meas.gamma:
        row += [fmt.format(v) for v in meas.y]
    else:
        row += [""] * 7
    return row


def write_measurements(path, stream, fmt: str = "{:.9f}") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_COLUMNS)
        for meas in stream:
            w.writerow(measurement_row(meas, fmt))


def read_measurements(path) -> list[Measurement]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != MEASUREMENT_COLUMNS:
            raise ConfigError(f"unexpected measurement columns: {header}")
        out = []
        for row in reader:
            t, gamma = float(row[0]), int(row[1])
            if gamma:
                out.append(Measurement(t, 1, np.array([float(v) for v in row[2:]])))
            else:
                out.append(Measurement.missing(t))
        return out
