"""Ground-plane tracking.

Ground pixels are back-projected onto a flat plane at barometric height, the
plane normal is taken from cross products of point triplets, and the rotation
aligning it with the reference normal yields roll and pitch.

A binary mask of a flat plane fixes the gravity direction only through its
horizon, so the direction used for back-projection is the normal of the
plane spanned by the horizon rays of the current frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    AntiparallelVectors,
    CollinearPoints,
    GimbalLock,
    InsufficientGroundRegion,
    NoBoundaryFound,
)
from .geometry import (
    CAMERA_TO_BODY,
    EPS_COS,
    CameraIntrinsics,
    OrientationRP,
    euler_from_rotation,
    rodrigues_align,
    unproject_many,
)
from .masks import BinaryMask
from .observation import Observation, Source, Untrackable


@dataclass(frozen=True)
class PlaneObservation:
    normal: np.ndarray
    points_used: int
    height: float
    timestamp: float = 0.0


@dataclass(frozen=True)
class GroundPlaneConfig:
    n_samples: int = 64
    triplets: int = 32
    min_separation: float = 10.0
    triplet_seed: int = 0
    column_stride: int = 8
    min_height: float = 300.0
    variance: float = math.radians(0.8) ** 2


def sample_ground_pixels(mask: BinaryMask, n: int) -> list[tuple[int, int]]:
    """Regular lattice of about ``n`` pixels over the GROUND bounding box.

    Lattice nodes falling on SKY are dropped.
    """
    ground = mask.ground
    rows = np.flatnonzero(ground.any(axis=1))
    cols = np.flatnonzero(ground.any(axis=0))
    if len(rows) == 0:
        raise InsufficientGroundRegion("mask has no GROUND cells")
    kv = max(1, math.ceil(math.sqrt(n)))
    ku = max(1, math.ceil(n / kv))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    vs = np.unique((r0 + (np.arange(kv) + 0.5) * (r1 - r0) / kv).astype(int))
    us = np.unique((c0 + (np.arange(ku) + 0.5) * (c1 - c0) / ku).astype(int))
    pixels = [(int(u), int(v)) for v in vs for u in us if ground[v, u]]
    if len(pixels) < 3:
        raise InsufficientGroundRegion(f"only {len(pixels)} GROUND lattice cells")
    return pixels[:n]


def reconstruct_ground_points(pixels, K: CameraIntrinsics, gravity, height: float) -> np.ndarray:
    """Back-project pixels onto the plane at ``height`` along ``gravity``.

    Pixels whose rays do not point toward the ground are dropped.
    """
    if height <= 0:
        raise ValueError("height must be positive")
    rays = unproject_many(K, pixels)
    g = np.asarray(gravity, dtype=float)
    g = g / np.linalg.norm(g)
    norms = np.linalg.norm(rays, axis=1)
    cos_t = (rays @ g) / norms
    keep = cos_t > EPS_COS
    if keep.sum() < 3:
        raise InsufficientGroundRegion(f"only {int(keep.sum())} rays reach the ground")
    scale = height / (cos_t[keep] * norms[keep])
    return rays[keep] * scale[:, None]


def plane_normal(
    points,
    triplets: int = 32,
    seed: int = 0,
    hemisphere=None,
    pixels=None,
    min_separation: float = 10.0,
) -> np.ndarray:
    """Unit normal averaged over random point triplets.

    Each triplet contributes the unit vector of (Pi - Pj) x (Pi - Pk), flipped
    into the half-space of ``hemisphere`` (default: the first valid cross
    product). Points are put in a canonical order first so the result does not
    depend on input order. When ``pixels`` are given, triplets with two pixels
    closer than ``min_separation`` are skipped.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(P) < 3:
        raise CollinearPoints("need at least three points")
    order = np.lexsort(P.T[::-1])
    P = P[order]
    px = None if pixels is None else np.asarray(pixels, dtype=float).reshape(-1, 2)[order]

    scale = float(np.max(np.linalg.norm(P - P.mean(axis=0), axis=1)))
    if scale == 0.0:
        raise CollinearPoints("all points coincide")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(P), size=(64 * triplets + 64, 3))
    i, j, k = idx.T
    ok = (i != j) & (j != k) & (i != k)
    if px is not None and min_separation > 0:
        def sep(a, b):
            return np.linalg.norm(px[a] - px[b], axis=1) >= min_separation
        ok &= sep(i, j) & sep(j, k) & sep(i, k)
    cross = np.cross(P[i] - P[j], P[i] - P[k])
    norm = np.linalg.norm(cross, axis=1)
    ok &= norm >= 1e-9 * scale * scale
    if not ok.any():
        raise CollinearPoints("every sampled triplet is degenerate")
    unit = (cross[ok] / norm[ok, None])[:triplets]
    ref = unit[0] if hemisphere is None else np.asarray(hemisphere, dtype=float)
    unit = np.where((unit @ ref)[:, None] < 0, -unit, unit)
    mean = unit.sum(axis=0)
    return mean / np.linalg.norm(mean)


def horizon_points(mask: BinaryMask, column_stride: int = 8) -> np.ndarray:
    """(u, v) of the first SKY->GROUND transition per sampled column.

    v sits halfway between the last SKY and the first GROUND pixel centre.
    """
    cols = np.arange(0, mask.width, column_stride)
    sub = mask.sky[:, cols]
    trans = sub[:-1] & ~sub[1:]
    found = trans.any(axis=0)
    v = np.argmax(trans, axis=0) + 0.5
    return np.column_stack([cols[found], v[found]]).astype(float)


def estimate_gravity(mask: BinaryMask, K: CameraIntrinsics, column_stride: int = 8) -> np.ndarray:
    """Downward gravity direction in the camera frame from the visible horizon.

    Horizon rays are orthogonal to gravity, so gravity is the direction least
    represented among them (smallest right singular vector).
    """
    pts = horizon_points(mask, column_stride)
    if len(pts) < 2:
        raise NoBoundaryFound("horizon not visible")
    rays = unproject_many(K, pts)
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    g = np.linalg.svd(rays)[2][-1]
    rows, cols = np.nonzero(mask.ground)
    if len(rows) == 0:
        raise InsufficientGroundRegion("mask has no GROUND cells")
    below = np.array([(cols.mean() - K.cx) / K.fx, (rows.mean() - K.cy) / K.fy, 1.0])
    return -g if g @ below < 0 else g


def measure_plane(
    mask: BinaryMask,
    K: CameraIntrinsics,
    height: float,
    config: GroundPlaneConfig = GroundPlaneConfig(),
    timestamp: float = 0.0,
) -> PlaneObservation:
    gravity = estimate_gravity(mask, K, config.column_stride)
    pixels = sample_ground_pixels(mask, config.n_samples)
    rays = unproject_many(K, pixels)
    keep = (rays @ gravity) / np.linalg.norm(rays, axis=1) > EPS_COS
    pixels = [p for p, ok in zip(pixels, keep) if ok]
    points = reconstruct_ground_points(pixels, K, gravity, height)
    normal = plane_normal(points, config.triplets, config.triplet_seed, gravity, pixels, config.min_separation)
    return PlaneObservation(normal, len(points), height, timestamp)


def plane_angles(current_normal, reference_normal) -> OrientationRP:
    """Roll and pitch of the rotation taking the current normal onto the reference one."""
    R = rodrigues_align(CAMERA_TO_BODY @ current_normal, CAMERA_TO_BODY @ reference_normal)
    try:
        angles = euler_from_rotation(R)
    except GimbalLock as exc:
        angles = exc.angles
    return OrientationRP(angles.roll, angles.pitch)


_TRACK_ERRORS = (InsufficientGroundRegion, CollinearPoints, AntiparallelVectors, NoBoundaryFound)


def track_plane(
    mask: BinaryMask,
    K: CameraIntrinsics,
    height: float,
    reference_normal,
    config: GroundPlaneConfig = GroundPlaneConfig(),
    timestamp: float = 0.0,
) -> Observation | Untrackable:
    if not height > config.min_height:
        return Untrackable(Source.GROUND_PLANE, timestamp,
                           f"height {height:.1f} m below trigger {config.min_height:.1f} m")
    try:
        plane = measure_plane(mask, K, height, config, timestamp)
        value = plane_angles(plane.normal, reference_normal)
    except _TRACK_ERRORS as exc:
        return Untrackable(Source.GROUND_PLANE, timestamp, str(exc))
    return Observation(Source.GROUND_PLANE, value, config.variance, timestamp)


class GroundPlaneTracker:
    """Holds the reference normal; the first measurable frame supplies it if none is given."""

    def __init__(self, K: CameraIntrinsics, config: GroundPlaneConfig = GroundPlaneConfig(),
                 reference_normal=None,
                 reference_orientation: OrientationRP = OrientationRP(0.0, 0.0)):
        self.K = K
        self.config = config
        self.reference_normal: Optional[np.ndarray] = (
            None if reference_normal is None else np.asarray(reference_normal, dtype=float)
        )
        self.reference_orientation = OrientationRP(*reference_orientation)

    def track(self, mask: BinaryMask, height: float, timestamp: float) -> Observation | Untrackable:
        if self.reference_normal is None:
            try:
                self.reference_normal = measure_plane(mask, self.K, max(height, 1.0), self.config).normal
            except _TRACK_ERRORS as exc:
                return Untrackable(Source.GROUND_PLANE, timestamp, f"no reference yet: {exc}")
        obs = track_plane(mask, self.K, height, self.reference_normal, self.config, timestamp)
        if isinstance(obs, Untrackable):
            return obs
        value = OrientationRP(obs.value.roll + self.reference_orientation.roll,
                              obs.value.pitch + self.reference_orientation.pitch)
        return Observation(Source.GROUND_PLANE, value, obs.variance, timestamp)
