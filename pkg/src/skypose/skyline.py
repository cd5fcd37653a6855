"""Skyline tracking: boundary search, line fit and roll/pitch deltas.

Roll comes from the change in skyline slope; pitch from the change in the
height of the skyline at the image centre, measured after undoing the roll.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateColumnSet, NoBoundaryFound
from .geometry import CameraIntrinsics, OrientationRP
from .masks import BinaryMask
from .observation import Observation, Source, Untrackable


class LinePrediction(NamedTuple):
    slope: float
    intercept: float

    def row_at(self, u):
        return self.slope * u + self.intercept


@dataclass(frozen=True)
class SkylineEstimate:
    slope: float
    intercept: float
    center_height: float
    n_points: int
    residual_rms: float
    timestamp: float = 0.0

    @property
    def line(self) -> LinePrediction:
        return LinePrediction(self.slope, self.intercept)


@dataclass(frozen=True)
class SkylineConfig:
    column_stride: int = 8
    search_halfwidth: float = 40.0
    deadband: float = math.radians(0.2)
    variance: float = math.radians(0.5) ** 2

    def __post_init__(self):
        if self.column_stride < 1:
            raise ValueError("column_stride must be >= 1")
        if self.search_halfwidth <= 0 or self.deadband < 0 or self.variance <= 0:
            raise ValueError("invalid skyline configuration")


def extract_boundary(
    mask: BinaryMask,
    predicted: Optional[LinePrediction] = None,
    column_stride: int = 8,
    search_halfwidth: float = 40.0,
) -> list[tuple[int, int]]:
    """Sample SKY->GROUND transitions column by column.

    A transition at row v means row v-1 is SKY and row v is GROUND. Without a
    prediction the first transition scanning downward is taken; with one, the
    transition nearest the predicted line inside +-search_halfwidth wins.
    Columns without an acceptable transition are skipped.
    """
    if column_stride < 1:
        raise ValueError("column_stride must be >= 1")
    cols = np.arange(0, mask.width, column_stride)
    sub = mask.sky[:, cols]
    trans = sub[:-1] & ~sub[1:]
    rows = np.arange(1, mask.height)

    if predicted is None:
        found = trans.any(axis=0)
        v = rows[np.argmax(trans, axis=0)]
    else:
        target = predicted.row_at(cols.astype(float))
        dist = np.abs(rows[:, None] - target[None, :])
        dist = np.where(trans & (dist <= search_halfwidth), dist, np.inf)
        best = np.argmin(dist, axis=0)
        found = np.isfinite(dist[best, np.arange(len(cols))])
        v = rows[best]

    points = [(int(u), int(r)) for u, r, ok in zip(cols, v, found) if ok]
    if len(points) < 2:
        raise NoBoundaryFound(f"only {len(points)} column(s) with a sky/ground transition")
    return points


def fit_line(points, width: Optional[float] = None, timestamp: float = 0.0) -> SkylineEstimate:
    """Least-squares fit v = m*u + b.

    ``center_height`` is the line evaluated at ``width / 2``; when ``width`` is
    omitted the centre of the sampled columns is used.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        raise DegenerateColumnSet("need at least two points")
    u, v = p[:, 0], p[:, 1]
    du = u - u.mean()
    suu = float(du @ du)
    if suu == 0.0:
        raise DegenerateColumnSet("all points share the same column")
    m = float(du @ (v - v.mean())) / suu
    b = float(v.mean() - m * u.mean())
    resid = v - (m * u + b)
    center_u = width / 2.0 if width is not None else 0.5 * (u.min() + u.max())
    return SkylineEstimate(
        slope=m,
        intercept=b,
        center_height=m * center_u + b,
        n_points=len(p),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        timestamp=timestamp,
    )


def roll_delta(current: SkylineEstimate, reference: SkylineEstimate) -> float:
    return math.atan(current.slope) - math.atan(reference.slope)


def pitch_from_heights(h1: float, h2: float, K: CameraIntrinsics) -> float:
    return math.atan((h1 - K.cy) / K.fy) - math.atan((h2 - K.cy) / K.fy)


def pitch_delta(current: SkylineEstimate, reference: SkylineEstimate, K: CameraIntrinsics) -> float:
    return pitch_from_heights(current.center_height, reference.center_height, K)


def compensated_center_height(est: SkylineEstimate, K: CameraIntrinsics) -> float:
    """Centre height after rotating the skyline by -atan(slope) about (cx, cy).

    Rotating the line to horizontal about the principal point leaves it at
    its perpendicular offset from that point.
    """
    offset = est.slope * K.cx + est.intercept - K.cy
    return K.cy + offset / math.sqrt(1.0 + est.slope**2)


def predict_line(prev: SkylineEstimate, prev2: SkylineEstimate, dt: float) -> LinePrediction:
    """Constant-rate extrapolation of slope and intercept by ``dt`` past ``prev``.

    Equal timestamps give no rate; the prediction then falls back to ``prev``.
    """
    span = prev.timestamp - prev2.timestamp
    if span <= 0:
        return LinePrediction(prev.slope, prev.intercept)
    k = dt / span
    return LinePrediction(
        prev.slope + (prev.slope - prev2.slope) * k,
        prev.intercept + (prev.intercept - prev2.intercept) * k,
    )


def measure_skyline(
    mask: BinaryMask,
    prev: Optional[SkylineEstimate],
    prev2: Optional[SkylineEstimate],
    timestamp: float,
    config: SkylineConfig = SkylineConfig(),
) -> SkylineEstimate:
    if prev is not None and prev2 is not None:
        predicted = predict_line(prev, prev2, timestamp - prev.timestamp)
    elif prev is not None:
        predicted = prev.line
    else:
        predicted = None
    points = extract_boundary(mask, predicted, config.column_stride, config.search_halfwidth)
    return fit_line(points, mask.width, timestamp)


def skyline_angles(
    current: SkylineEstimate,
    reference: SkylineEstimate,
    K: CameraIntrinsics,
    config: SkylineConfig = SkylineConfig(),
) -> OrientationRP:
    roll = roll_delta(current, reference)
    if abs(roll) <= config.deadband:
        roll = 0.0
        h1, h2 = current.center_height, reference.center_height
    else:
        h1 = compensated_center_height(current, K)
        h2 = compensated_center_height(reference, K)
    pitch = pitch_from_heights(h1, h2, K)
    if abs(pitch) <= config.deadband:
        pitch = 0.0
    return OrientationRP(roll, pitch)


def track_frame(
    mask: BinaryMask,
    reference: SkylineEstimate,
    prev: Optional[SkylineEstimate],
    prev2: Optional[SkylineEstimate],
    K: CameraIntrinsics,
    config: SkylineConfig = SkylineConfig(),
    timestamp: float = 0.0,
) -> Observation | Untrackable:
    try:
        est = measure_skyline(mask, prev, prev2, timestamp, config)
    except (NoBoundaryFound, DegenerateColumnSet) as exc:
        return Untrackable(Source.SKYLINE, timestamp, str(exc))
    return Observation(Source.SKYLINE, skyline_angles(est, reference, K, config), config.variance, timestamp)


class SkylineTracker:
    """Stateful wrapper: the first trackable frame becomes the reference.

    ``reference_orientation`` is the known attitude of the reference frame
    (level by default) and is added to every delta.
    """

    def __init__(self, K: CameraIntrinsics, config: SkylineConfig = SkylineConfig(),
                 reference_orientation: OrientationRP = OrientationRP(0.0, 0.0)):
        self.K = K
        self.config = config
        self.reference_orientation = OrientationRP(*reference_orientation)
        self.reference: Optional[SkylineEstimate] = None
        self.prev: Optional[SkylineEstimate] = None
        self.prev2: Optional[SkylineEstimate] = None

    def track(self, mask: BinaryMask, timestamp: float) -> Observation | Untrackable:
        try:
            est = measure_skyline(mask, self.prev, self.prev2, timestamp, self.config)
        except (NoBoundaryFound, DegenerateColumnSet) as exc:
            # lost lock: search whole columns on the next frame
            self.prev = self.prev2 = None
            return Untrackable(Source.SKYLINE, timestamp, str(exc))
        if self.reference is None:
            self.reference = est
        self.prev2, self.prev = self.prev, est
        delta = skyline_angles(est, self.reference, self.K, self.config)
        value = OrientationRP(delta.roll + self.reference_orientation.roll,
                              delta.pitch + self.reference_orientation.pitch)
        return Observation(Source.SKYLINE, value, self.config.variance, timestamp)
