"""Synthetic test bed: attitude trajectories, flat-earth masks, IMU and barometer streams."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, OrientationRP, camera_to_world
from .masks import BinaryMask
from .observation import Observation, Source

DEFAULT_SIZE = (640, 480)
DEFAULT_RATE = 20.0
DEFAULT_HEIGHT = 400.0
ANGLE_LIMIT = math.radians(30.0)
IMU_VARIANCE_FLOOR = 1e-12

# Independent RNG streams derived from one scenario seed.
STREAM_TRAJECTORY = 1
STREAM_IMU = 2
STREAM_BARO = 3
STREAM_SKYLINE = 4
STREAM_GROUND = 5
STREAM_FILTER = 6


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([stream, int(seed) & 0xFFFFFFFFFFFFFFFF])


class Pattern(enum.Enum):
    ROLL = "roll"
    PITCH = "pitch"
    MIXED = "mixed"


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    height: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.roll) == len(self.pitch) == len(self.height) == n):
            raise ValueError("trajectory columns differ in length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def orientation(self, i: int) -> OrientationRP:
        return OrientationRP(float(self.roll[i]), float(self.pitch[i]))


@dataclass(frozen=True)
class SensorNoiseModel:
    imu_sigma: float = math.radians(1.0)
    imu_bias_rate: float = math.radians(0.3)
    baro_sigma: float = 0.5
    seed: int = 0
    skyline_sigma: float = 0.0
    ground_sigma: float = 0.0

    def __post_init__(self):
        for name in ("imu_sigma", "baro_sigma", "skyline_sigma", "ground_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def triangle_wave(t, speed: float, amplitude: float = ANGLE_LIMIT) -> np.ndarray:
    """Sweep starting at 0 rising at ``speed`` and folding at +-amplitude."""
    t = np.asarray(t, dtype=float)
    if speed == 0:
        return np.zeros_like(t)
    phase = np.mod(speed * t + amplitude, 4.0 * amplitude)
    return amplitude - np.abs(phase - 2.0 * amplitude)


def _bounded_walk(rng, n, dt, speed, limit, rate_tau=0.5, revert_tau=5.0):
    """Mean-reverting walk whose angular rate is an OU process with std ``speed``."""
    angle = np.zeros(n)
    if n == 0 or speed == 0:
        return angle
    decay = math.exp(-dt / rate_tau)
    kick = speed * math.sqrt(1.0 - decay * decay)
    rate = speed * rng.standard_normal()
    for k in range(1, n):
        nxt = angle[k - 1] + dt * (rate - angle[k - 1] / revert_tau)
        if abs(nxt) > limit:
            nxt = math.copysign(limit, nxt)
            rate = -rate
        angle[k] = nxt
        rate = rate * decay + kick * rng.standard_normal()
    return angle


def make_trajectory(
    pattern,
    speed: float,
    duration: float,
    rate: float = DEFAULT_RATE,
    seed: int = 0,
    height: float = DEFAULT_HEIGHT,
    limit: float = ANGLE_LIMIT,
) -> Trajectory:
    """Ground-truth attitude sampled at ``rate`` Hz, t_i = i / rate.

    ROLL and PITCH sweep one axis as a triangle wave within +-limit; MIXED is a
    bounded random walk on both axes whose RMS angular rate is ``speed``.
    """
    pattern = Pattern(pattern)
    if speed < 0 or duration < 0 or rate <= 0:
        raise ValueError("speed and duration must be >= 0 and rate > 0")
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    zeros = np.zeros(n)
    if pattern is Pattern.ROLL:
        roll, pitch = triangle_wave(t, speed, limit), zeros
    elif pattern is Pattern.PITCH:
        roll, pitch = zeros, triangle_wave(t, speed, limit)
    else:
        rng = stream_rng(seed, STREAM_TRAJECTORY)
        roll = _bounded_walk(rng, n, 1.0 / rate, speed, limit)
        pitch = _bounded_walk(rng, n, 1.0 / rate, speed, limit)
    return Trajectory(t, roll, pitch.copy(), np.full(n, float(height)))


def render_mask(orientation, K: CameraIntrinsics, size=DEFAULT_SIZE) -> BinaryMask:
    """SKY where the pixel ray, rotated into the world, points above the horizon."""
    roll, pitch = orientation
    width, height = size
    a = camera_to_world(roll, pitch)[2]
    x = (np.arange(width) - K.cx) / K.fx
    y = (np.arange(height) - K.cy) / K.fy
    up = a[0] * x[None, :] + a[1] * y[:, None] + a[2]
    return BinaryMask(up > 0.0)


def simulate_imu(traj: Trajectory, noise: SensorNoiseModel) -> list[Observation]:
    """IMU attitude readings: truth + linear bias drift + white noise.

    The reported variance is imu_sigma^2 only; the bias is hidden from consumers.
    """
    rng = stream_rng(noise.seed, STREAM_IMU)
    n = len(traj)
    eps = rng.standard_normal((n, 2)) * noise.imu_sigma
    bias = noise.imu_bias_rate * traj.t
    roll = traj.roll + bias + eps[:, 0]
    pitch = traj.pitch + bias + eps[:, 1]
    var = max(noise.imu_sigma**2, IMU_VARIANCE_FLOOR)
    return [
        Observation(Source.IMU, OrientationRP(float(r), float(p)), var, float(t))
        for t, r, p in zip(traj.t, roll, pitch)
    ]


def simulate_barometer(traj: Trajectory, noise: SensorNoiseModel) -> list[tuple[float, float]]:
    rng = stream_rng(noise.seed, STREAM_BARO)
    h = traj.height + rng.standard_normal(len(traj)) * noise.baro_sigma
    return [(float(t), float(x)) for t, x in zip(traj.t, h)]


def baseline_imu_only(imu_stream, smoothing: float) -> list[OrientationRP]:
    """First-order low-pass (time constant ``smoothing`` s) of IMU readings.

    Each reading is held over the interval ending at its timestamp, so the
    response to a step is exactly 1 - exp(-t / smoothing).
    """
    out: list[OrientationRP] = []
    state = None
    last_t = None
    for obs in imu_stream:
        x = np.array(obs.value, dtype=float)
        if state is None or smoothing <= 0:
            state = x
        else:
            keep = math.exp(-(obs.timestamp - last_t) / smoothing)
            state = x + (state - x) * keep
        last_t = obs.timestamp
        out.append(OrientationRP(float(state[0]), float(state[1])))
    return out
