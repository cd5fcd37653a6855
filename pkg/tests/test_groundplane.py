import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DEG
from skypose.errors import CollinearPoints, GimbalLock, InsufficientGroundRegion
from skypose.geometry import CAMERA_TO_BODY, CameraIntrinsics, euler_from_rotation, rodrigues_align
from skypose.groundplane import (
    GroundPlaneConfig,
    GroundPlaneTracker,
    estimate_gravity,
    measure_plane,
    plane_angles,
    plane_normal,
    reconstruct_ground_points,
    sample_ground_pixels,
    track_plane,
)
from skypose.masks import BinaryMask
from skypose.observation import Observation, Untrackable
from skypose.simulator import render_mask

SIZE = (640, 480)


def normal_at(roll, pitch, K, height=400.0):
    return measure_plane(render_mask((roll * DEG, pitch * DEG), K, SIZE), K, height).normal


# sampling

def test_sample_all_ground_lattice():
    px = sample_ground_pixels(BinaryMask.full(90, 60, False), 9)
    assert len(px) == 9
    assert len({u for u, _ in px}) == 3 and len({v for _, v in px}) == 3


def test_sample_bottom_half():
    px = sample_ground_pixels(BinaryMask.horizontal(80, 60, 30), 9)
    assert px and all(v > 30 for _, v in px)


def test_sample_all_sky():
    with pytest.raises(InsufficientGroundRegion):
        sample_ground_pixels(BinaryMask.full(80, 60, True), 9)


# reconstruction

def test_reconstruct_examples():
    K = CameraIntrinsics(100, 100, 50, 50)
    pts = reconstruct_ground_points([(50, 50), (150, 50), (50, 150)], K, (0, 0, 1), 100)
    np.testing.assert_allclose(pts, [[0, 0, 100], [100, 0, 100], [0, 100, 100]], atol=1e-12)


def test_reconstruct_drops_rays_parallel_to_ground():
    K = CameraIntrinsics(100, 100, 50, 50)
    gravity = (0, 1, 0)
    # principal ray is orthogonal to this gravity and must be dropped
    pts = reconstruct_ground_points([(50, 50), (50, 150), (60, 150), (40, 160)], K, gravity, 10)
    assert len(pts) == 3
    np.testing.assert_allclose(pts[:, 1], 10, atol=1e-12)


def test_reconstruct_too_few():
    K = CameraIntrinsics(100, 100, 50, 50)
    with pytest.raises(InsufficientGroundRegion):
        reconstruct_ground_points([(50, 50), (50, 150)], K, (0, 1, 0), 10)


# plane_normal

def test_plane_normal_triangle():
    n = plane_normal([(0, 0, 100), (1, 0, 100), (0, 1, 100)])
    np.testing.assert_allclose(np.abs(n), [0, 0, 1], atol=1e-15)


def test_plane_normal_tilted(rng):
    xy = rng.uniform(-50, 50, size=(100, 2))
    pts = np.column_stack([xy, 100 + 0.1 * xy[:, 0]])
    n = plane_normal(pts, hemisphere=(0, 0, 1))
    expected = np.array([-0.1, 0, 1]) / math.hypot(0.1, 1)
    np.testing.assert_allclose(n, expected, atol=1e-6)


def test_plane_normal_collinear():
    with pytest.raises(CollinearPoints):
        plane_normal([(0, 0, 0), (1, 1, 1), (2, 2, 2)])


@given(st.floats(1e-3, 1e3))
def test_plane_normal_scale_invariant(c):
    pts = np.random.default_rng(5).normal(size=(40, 3)) * (5, 5, 0.3)
    np.testing.assert_allclose(plane_normal(pts * c), plane_normal(pts), atol=1e-9)


@given(st.permutations(range(30)))
def test_plane_normal_permutation_invariant(perm):
    pts = np.random.default_rng(6).normal(size=(30, 3)) * (5, 5, 0.3)
    np.testing.assert_array_equal(plane_normal(pts[list(perm)], hemisphere=(0, 0, 1)),
                                  plane_normal(pts, hemisphere=(0, 0, 1)))


# gravity from the horizon

@pytest.mark.parametrize("roll,pitch", [(0, 0), (5, 3), (-20, 15)])
def test_estimated_gravity_matches_truth(K, roll, pitch):
    from skypose.geometry import camera_to_world
    mask = render_mask((roll * DEG, pitch * DEG), K, SIZE)
    truth = camera_to_world(roll * DEG, pitch * DEG).T @ np.array([0, 0, -1.0])
    assert np.degrees(math.acos(min(1.0, estimate_gravity(mask, K) @ truth))) < 0.1


# track_plane

def test_identity_reference_gives_exact_zero(K):
    mask = render_mask((7 * DEG, -4 * DEG), K, SIZE)
    ref = measure_plane(mask, K, 400).normal
    obs = track_plane(mask, K, 400, ref)
    assert isinstance(obs, Observation)
    assert obs.value == (0.0, 0.0)
    assert obs.variance == GroundPlaneConfig().variance


def test_track_plane_recovers_orientation(K):
    obs = track_plane(render_mask((5 * DEG, 3 * DEG), K, SIZE), K, 400, normal_at(0, 0, K))
    assert abs(obs.value.roll - 5 * DEG) <= 0.5 * DEG
    assert abs(obs.value.pitch - 3 * DEG) <= 0.5 * DEG


def test_track_plane_below_trigger(K):
    obs = track_plane(render_mask((0, 0), K, SIZE), K, 100, normal_at(0, 0, K))
    assert isinstance(obs, Untrackable)
    obs = track_plane(render_mask((0, 0), K, SIZE), K, 100, normal_at(0, 0, K),
                      GroundPlaneConfig(min_height=50))
    assert isinstance(obs, Observation)


def test_track_plane_all_sky(K):
    assert isinstance(track_plane(BinaryMask.full(*SIZE, True), K, 400, normal_at(0, 0, K)), Untrackable)


def test_composition_consistency(K):
    rp = lambda R: np.array(euler_from_rotation(R)[:2])
    for a, b, c in [((0, 0), (3, 2), (6, -1)), ((-5, 4), (-8, 9), (-2, 10)), ((2, 2), (9, -9), (10, -10))]:
        nA, nB, nC = (CAMERA_TO_BODY @ normal_at(*x, K) for x in (a, b, c))
        direct = np.array(plane_angles(normal_at(*c, K), normal_at(*a, K)))
        composed = rp(rodrigues_align(nB, nA) @ rodrigues_align(nC, nB))
        assert np.max(np.abs(direct - composed)) <= 0.2 * DEG


def test_plane_angles_handles_gimbal_lock():
    # a 90 degree pitch between normals is degenerate but still reported
    try:
        v = plane_angles(np.array([0, 0, 1.0]), np.array([0, -1.0, 0]))
    except GimbalLock:  # pragma: no cover
        pytest.fail("GimbalLock leaked out of plane_angles")
    assert all(math.isfinite(x) for x in v)


def test_tracker_first_frame_sets_reference(K):
    tr = GroundPlaneTracker(K)
    first = tr.track(render_mask((0, 0), K, SIZE), 400, 0.0)
    assert first.value == (0.0, 0.0)
    obs = tr.track(render_mask((-6 * DEG, 8 * DEG), K, SIZE), 400, 0.05)
    assert abs(obs.value.roll + 6 * DEG) <= 0.5 * DEG
    assert abs(obs.value.pitch - 8 * DEG) <= 0.5 * DEG
