"""Scenario configuration: dataclasses, INI-style file format and presets.

A scenario file has one section per module. Every key has a default except
``duration`` and ``seed`` in ``[scenario]``::

    [scenario]
    name = demo
    duration = 10.0
    seed = 7
    use_ekf = true
    out_dir = out/demo

    [plant]
    mass = 22.0
    cable_length = 1.215
    block_dims = 0.8, 0.6, 0.2
    cog_offset = 0.1
    gravity = 9.81
    # inertia = Ixx, Iyy, Izz   (or 9 row-major values); default: uniform cuboid
    initial_q = 0.02, 0.15, 0.03, -0.02, 0.05
    initial_qdot = 0, 0, 0, 0, 0
    truth_max_step = 0.001

    [sensor]
    rate = 40
    decimation = 1
    drop_prob = 0.0
    pos_noise_std = 0.005
    rot_noise_std = 0.01

    [ekf]
    rate = 300
    q_position = 1e-6
    q_velocity = 1e-4
    p0_position = 1e-2
    p0_velocity = 1e-1
    r_floor = 1e-12
    init = measurement        # or: truth
    joseph = false

    [controller]
    rate = 1000
    kp = 400                  # scalar (isotropic) or 6 diagonal values
    kd = 40
    mass = 1.0
    inertia = 1.0

    [frames]
    # poses as tx, ty, tz, qw, qx, qy, qz
    base_camera = 1.2, -2.0, 1.2, 0.7071067811865476, -0.7071067811865476, 0, 0
    base_pivot = 1.2, 0, 2.3, 1, 0, 0, 0
    board_block = 0, 0.3, 0, 1, 0, 0, 0
    block_des = -0.4, 0, 0, 0.7071067811865476, 0, 0.7071067811865476, 0

    [acceptance]
    # optional absolute bounds checked by the CLI
    max_est_rmse_pos = 0.006
    max_track_rmse_pos = 0.05
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from blocktrack.camera import SensorConfig
from blocktrack.control import ControllerGains
from blocktrack.errors import ConfigError, InvalidStateError
from blocktrack.pendulum import PendulumParams, PendulumState
from blocktrack.se3 import Pose, quat_from_axis_angle

SECTIONS = ("scenario", "plant", "sensor", "ekf", "controller", "frames", "acceptance")


@dataclass(frozen=True)
class EkfConfig:
    rate: int = 300
    q_position: float = 1e-6
    q_velocity: float = 1e-4
    p0_position: float = 1e-2
    p0_velocity: float = 1e-1
    r_floor: float = 1e-12
    init: str = "measurement"
    joseph: bool = False

    def __post_init__(self):
        if self.init not in ("measurement", "truth"):
            raise ConfigError(f"ekf.init must be 'measurement' or 'truth', got {self.init!r}")
        for name in ("q_position", "q_velocity", "r_floor"):
            if getattr(self, name) < 0:
                raise ConfigError(f"ekf.{name} must be non-negative")
        for name in ("p0_position", "p0_velocity"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"ekf.{name} must be positive")

    def process_noise(self) -> np.ndarray:
        return np.diag([self.q_position] * 5 + [self.q_velocity] * 5)

    def initial_cov(self) -> np.ndarray:
        return np.diag([self.p0_position] * 5 + [self.p0_velocity] * 5)

    def measurement_noise(self, sensor: SensorConfig) -> np.ndarray:
        """Consistent with the camera noise: per-axis position variance, and for the
        quaternion rot_std^2 / 12 per component (a rotation of angle ~ N(0, s^2)
        about a uniform axis moves each vector component by s^2/12 in variance)."""
        pos = max(sensor.pos_noise_std**2, self.r_floor)
        rot = max(sensor.rot_noise_std**2 / 12.0, self.r_floor)
        return np.diag([pos] * 3 + [rot] * 4)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    gains: ControllerGains = field(default_factory=ControllerGains.isotropic)
    rate: int = 1000
    mass: float = 1.0
    inertia: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.inertia > 0):
            raise ConfigError("controller mass and inertia must be positive")


def _default_pose(t, axis=None, angle=0.0) -> Pose:
    q = [1.0, 0.0, 0.0, 0.0] if axis is None else quat_from_axis_angle(axis, angle)
    return Pose(q, t)


@dataclass(frozen=True, eq=False)
class Frames:
    """Static transforms of the scene. ``base_pivot`` locates the suspension frame."""

    base_camera: Pose = field(default_factory=lambda: _default_pose([1.2, -2.0, 1.2], [1, 0, 0], -np.pi / 2))
    base_pivot: Pose = field(default_factory=lambda: _default_pose([1.2, 0.0, 2.3]))
    board_block: Pose = field(default_factory=lambda: _default_pose([0.0, 0.3, 0.0]))
    block_des: Pose = field(default_factory=lambda: _default_pose([-0.4, 0.0, 0.0], [0, 1, 0], np.pi / 2))


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    duration: float
    seed: int
    name: str = "scenario"
    plant: PendulumParams = field(default_factory=PendulumParams)
    initial: PendulumState = field(default_factory=PendulumState.at_rest)
    truth_max_step: float = 1e-3
    sensor: SensorConfig = field(default_factory=SensorConfig)
    ekf: EkfConfig = field(default_factory=EkfConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    frames: Frames = field(default_factory=Frames)
    use_ekf: bool = True
    out_dir: Optional[str] = None
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not 0 < self.truth_max_step <= 0.1:
            raise ConfigError("truth_max_step must lie in (0, 0.1]")
        for name, rate in (("sensor", self.sensor.rate), ("ekf", self.ekf.rate), ("controller", self.controller.rate)):
            if float(rate) != int(rate) or rate <= 0:
                raise ConfigError(f"{name} rate must be a positive integer number of Hz, got {rate}")
        if not (self.controller.rate >= self.ekf.rate >= self.sensor.rate / self.sensor.decimation * (1 - self.sensor.drop_prob)):
            raise ConfigError("rates must satisfy controller >= ekf >= effective sensor rate")
        # the scenario seed drives the sensor streams
        object.__setattr__(self, "sensor", replace(self.sensor, seed=int(self.seed)))

    def with_overrides(self, **kw) -> ScenarioConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def _vector(section, key, n, default=None):
    if key not in section:
        return default
    vals = _floats(section[key])
    if len(vals) != n:
        raise ConfigError(f"{section.name}.{key} needs {n} values, got {len(vals)}")
    return np.array(vals)


def _pose(section, key, default: Pose) -> Pose:
    v = _vector(section, key, 7)
    if v is None:
        return default
    try:
        return Pose.from_vector(v)
    except InvalidStateError as exc:
        raise ConfigError(f"{section.name}.{key}: {exc}") from exc


def _gain(section, key, default):
    if key not in section:
        return default * np.eye(6)
    vals = _floats(section[key])
    if len(vals) == 1:
        return vals[0] * np.eye(6)
    if len(vals) == 6:
        return np.diag(vals)
    if len(vals) == 36:
        return np.array(vals).reshape(6, 6)
    raise ConfigError(f"controller.{key} needs 1, 6 or 36 values")


def _check_keys(parser: configparser.ConfigParser, allowed: dict) -> None:
    for sec in parser.sections():
        if sec not in allowed:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(parser[sec]) - allowed[sec]
        if extra:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(extra)}")


ALLOWED_KEYS = {
    "scenario": {"name", "duration", "seed", "use_ekf", "out_dir"},
    "plant": {"mass", "cable_length", "block_dims", "cog_offset", "gravity", "inertia", "initial_q", "initial_qdot", "truth_max_step"},
    "sensor": {"rate", "decimation", "drop_prob", "pos_noise_std", "rot_noise_std"},
    "ekf": {"rate", "q_position", "q_velocity", "p0_position", "p0_velocity", "r_floor", "init", "joseph"},
    "controller": {"rate", "kp", "kd", "mass", "inertia"},
    "frames": {"base_camera", "base_pivot", "board_block", "block_des"},
    "acceptance": {"max_est_rmse_pos", "max_track_rmse_pos", "max_est_rmse_q"},
    "calibration": {"x_true", "max_n", "rot_noise", "trans_noise", "seed", "trials"},
}


def parse_scenario(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    _check_keys(parser, ALLOWED_KEYS)
    get = lambda name: parser[name] if parser.has_section(name) else parser["DEFAULT"]  # noqa: E731

    sc = get("scenario")
    for key in ("duration", "seed"):
        if key not in sc:
            raise ConfigError(f"[scenario] requires '{key}'")
    try:
        pl = get("plant")
        defaults = PendulumParams()
        inertia = pl.get("inertia")
        if inertia is not None:
            vals = _floats(inertia)
            if len(vals) == 3:
                inertia = np.diag(vals)
            elif len(vals) == 9:
                inertia = np.array(vals).reshape(3, 3)
            else:
                raise ConfigError("plant.inertia needs 3 or 9 values")
        dims = _vector(pl, "block_dims", 3, np.array(defaults.block_dims))
        params = PendulumParams(
            mass=pl.getfloat("mass", defaults.mass),
            cable_length=pl.getfloat("cable_length", defaults.cable_length),
            block_dims=tuple(dims),
            cog_offset=pl.getfloat("cog_offset", defaults.cog_offset),
            inertia=inertia,
            gravity=pl.getfloat("gravity", defaults.gravity),
        )
        initial = PendulumState(_vector(pl, "initial_q", 5, np.zeros(5)), _vector(pl, "initial_qdot", 5, np.zeros(5)))

        se = get("sensor")
        sd = SensorConfig()
        sensor = SensorConfig(
            rate=se.getfloat("rate", sd.rate),
            decimation=se.getint("decimation", sd.decimation),
            drop_prob=se.getfloat("drop_prob", sd.drop_prob),
            pos_noise_std=se.getfloat("pos_noise_std", sd.pos_noise_std),
            rot_noise_std=se.getfloat("rot_noise_std", sd.rot_noise_std),
        )

        ek = get("ekf")
        ed = EkfConfig()
        ekf = EkfConfig(
            rate=ek.getint("rate", ed.rate),
            q_position=ek.getfloat("q_position", ed.q_position),
            q_velocity=ek.getfloat("q_velocity", ed.q_velocity),
            p0_position=ek.getfloat("p0_position", ed.p0_position),
            p0_velocity=ek.getfloat("p0_velocity", ed.p0_velocity),
            r_floor=ek.getfloat("r_floor", ed.r_floor),
            init=ek.get("init", ed.init),
            joseph=ek.getboolean("joseph", ed.joseph),
        )

        co = get("controller")
        controller = ControllerConfig(
            gains=ControllerGains(_gain(co, "kp", 400.0), _gain(co, "kd", 40.0)),
            rate=co.getint("rate", 1000),
            mass=co.getfloat("mass", 1.0),
            inertia=co.getfloat("inertia", 1.0),
        )

        fr = get("frames")
        fd = Frames()
        frames = Frames(
            base_camera=_pose(fr, "base_camera", fd.base_camera),
            base_pivot=_pose(fr, "base_pivot", fd.base_pivot),
            board_block=_pose(fr, "board_block", fd.board_block),
            block_des=_pose(fr, "block_des", fd.block_des),
        )

        bounds = {}
        if parser.has_section("acceptance"):
            bounds = {k: float(v) for k, v in parser["acceptance"].items() if k in ALLOWED_KEYS["acceptance"]}

        return ScenarioConfig(
            duration=sc.getfloat("duration"),
            seed=sc.getint("seed"),
            name=sc.get("name", "scenario"),
            plant=params,
            initial=initial,
            truth_max_step=pl.getfloat("truth_max_step", 1e-3),
            sensor=sensor,
            ekf=ekf,
            controller=controller,
            frames=frames,
            use_ekf=sc.getboolean("use_ekf", True),
            out_dir=sc.get("out_dir"),
            bounds=bounds,
        )
    except (ValueError, InvalidStateError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text())


# Oscillation mostly along the pivot x-axis (q2), with small excitation of the other coordinates.
PRESET_INITIAL_Q = (0.02, 0.15, 0.03, -0.02, 0.05)
PRESET_DURATION = 10.0


def preset(name: str, seed: int = 0, duration: float = PRESET_DURATION, use_ekf: bool = True) -> ScenarioConfig:
    """Named scenarios: ``fig7-upper`` (40 Hz camera) and ``fig7-lower`` (1 of 4 samples kept, 10 Hz)."""
    decimation = {"fig7-upper": 1, "fig7-lower": 4}.get(name)
    if decimation is None:
        raise ConfigError(f"unknown preset {name!r}; choose fig7-upper or fig7-lower")
    return ScenarioConfig(
        duration=duration,
        seed=seed,
        name=name,
        initial=PendulumState.at_rest(PRESET_INITIAL_Q),
        sensor=SensorConfig(rate=40.0, decimation=decimation),
        use_ekf=use_ekf,
    )


def parse_calibration(text: str) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    if not parser.has_section("calibration"):
        raise ConfigError("calibration config needs a [calibration] section")
    _check_keys(parser, {k: v for k, v in ALLOWED_KEYS.items() if k in ("calibration", "scenario")})
    sec = parser["calibration"]
    x_true = _pose(sec, "x_true", Pose(quat_from_axis_angle([1.0, 2.0, 3.0], 0.7), [0.4, -1.1, 0.9]))
    try:
        out = {
            "x_true": x_true,
            "max_n": sec.getint("max_n", 30),
            "rot_noise": sec.getfloat("rot_noise", 0.002),
            "trans_noise": sec.getfloat("trans_noise", 0.001),
            "seed": sec.getint("seed", 0),
            "trials": sec.getint("trials", 1),
        }
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if out["max_n"] < 3:
        raise ConfigError("calibration.max_n must be at least 3")
    return out
