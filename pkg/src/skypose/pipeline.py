"""Run the trackers, the IMU baseline and the fusion filter over one scenario's streams."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .filter import FilterConfig, ManifoldParticleFilter
from .geometry import CameraIntrinsics, OrientationRP
from .groundplane import GroundPlaneConfig, GroundPlaneTracker
from .masks import BinaryMask
from .observation import Observation
from .simulator import STREAM_GROUND, STREAM_SKYLINE, baseline_imu_only, stream_rng
from .skyline import SkylineConfig, SkylineTracker

METHODS = ("imu", "skyline", "ground", "fusion")


@dataclass(frozen=True)
class PipelineConfig:
    skyline: SkylineConfig = field(default_factory=SkylineConfig)
    ground: GroundPlaneConfig = field(default_factory=GroundPlaneConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    baseline_smoothing: float = 0.5
    skyline_sigma: float = 0.0
    ground_sigma: float = 0.0


def track_vision(
    masks: Iterable[BinaryMask],
    times: Sequence[float],
    heights: Sequence[float],
    K: CameraIntrinsics,
    config: PipelineConfig = PipelineConfig(),
) -> tuple[list, list]:
    """Noise-free skyline and ground-plane results, one entry per frame."""
    sky = SkylineTracker(K, config.skyline)
    ground = GroundPlaneTracker(K, config.ground)
    sky_out, ground_out = [], []
    for mask, t, h in zip(masks, times, heights):
        sky_out.append(sky.track(mask, float(t)))
        ground_out.append(ground.track(mask, float(h), float(t)))
    return sky_out, ground_out


def perturb(observations, sigma: float, rng: np.random.Generator):
    """Add white noise of std ``sigma`` to each measurement; Untrackable entries pass through.

    One draw pair is consumed per frame either way, so the noise sequence does
    not depend on which frames were trackable.
    """
    noise = rng.standard_normal((len(observations), 2)) * sigma
    out = []
    for obs, (er, ep) in zip(observations, noise):
        if isinstance(obs, Observation) and sigma > 0:
            obs = replace(obs, value=OrientationRP(obs.value.roll + er, obs.value.pitch + ep))
        out.append(obs)
    return out


def noisy_vision(sky, ground, config: PipelineConfig, seed: int):
    return (perturb(sky, config.skyline_sigma, stream_rng(seed, STREAM_SKYLINE)),
            perturb(ground, config.ground_sigma, stream_rng(seed, STREAM_GROUND)))


def hold_last(observations, initial: OrientationRP = OrientationRP(0.0, 0.0)) -> list[OrientationRP]:
    """Per-frame track that repeats the last measurement over untrackable frames."""
    out, last = [], initial
    for obs in observations:
        if isinstance(obs, Observation):
            last = obs.value
        out.append(last)
    return out


def run_fusion(imu, sky, ground, filter_config: FilterConfig,
               on_step: Optional[Callable] = None) -> list[OrientationRP]:
    pf = ManifoldParticleFilter(filter_config)
    out = []
    for k, obs in enumerate(imu):
        c1 = sky[k] if isinstance(sky[k], Observation) else None
        c2 = ground[k] if isinstance(ground[k], Observation) else None
        est = pf.step(obs, c1, c2, obs.timestamp)
        out.append(est.value)
        if on_step is not None:
            on_step(pf, est)
    return out


def run_methods(methods, imu, sky, ground, config: PipelineConfig,
                on_fusion_step: Optional[Callable] = None) -> dict[str, list[OrientationRP]]:
    """Per-frame estimates for each requested method, keyed by method name."""
    tracks = {}
    for name in methods:
        if name == "imu":
            tracks[name] = baseline_imu_only(imu, config.baseline_smoothing)
        elif name == "skyline":
            tracks[name] = hold_last(sky)
        elif name == "ground":
            tracks[name] = hold_last(ground)
        elif name == "fusion":
            tracks[name] = run_fusion(imu, sky, ground, config.filter, on_fusion_step)
        else:
            raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")
    return tracks


def errors(track: Sequence[OrientationRP], truth_roll, truth_pitch) -> tuple[np.ndarray, np.ndarray]:
    est = np.asarray(track, dtype=float).reshape(-1, 2)
    return est[:, 0] - np.asarray(truth_roll), est[:, 1] - np.asarray(truth_pitch)


