"""Rotation, camera and ray geometry shared by the trackers and the simulator.

Frames
------
Camera: x right, y down, z forward (optical axis); pixel rows grow downward.

Body: x backward, y right, z up. A camera vector ``c`` maps to body
coordinates as ``CAMERA_TO_BODY @ c``. The world frame coincides with the
body frame of a level camera, so gravity points along world ``-z``.

Attitude is the intrinsic Z-Y-X composition ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``
taking body vectors into the world. With the body axes above, positive roll
tilts the horizon to a positive image slope and positive pitch moves the
horizon down the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AntiparallelVectors, GimbalLock, RayParallelToGround

EPS_ANTI = 1e-8
EPS_GIMBAL = 1e-9
EPS_COS = 1e-9

CAMERA_TO_BODY = np.array(
    [
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)
BODY_TO_CAMERA = CAMERA_TO_BODY.T

# Unit gravity direction in the world frame.
WORLD_GRAVITY = np.array([0.0, 0.0, -1.0])


class OrientationRP(NamedTuple):
    roll: float
    pitch: float


class EulerAngles(NamedTuple):
    roll: float
    pitch: float
    yaw: float


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @classmethod
    def centered(cls, focal: float, width: int, height: int) -> "CameraIntrinsics":
        return cls(focal, focal, width / 2.0, height / 2.0)

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def check_image(self, width: int, height: int) -> None:
        if not (0 <= self.cx <= width and 0 <= self.cy <= height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside {width}x{height} image")


@dataclass(frozen=True)
class UnitQuaternion:
    """Hamilton quaternion [w, x, y, z], stored canonically with w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if n == 0.0:
            raise ValueError("zero quaternion")
        s = 1.0 / n if self.w >= 0 else -1.0 / n
        object.__setattr__(self, "w", self.w * s)
        object.__setattr__(self, "x", self.x * s)
        object.__setattr__(self, "y", self.y * s)
        object.__setattr__(self, "z", self.z * s)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        h = 0.5 * angle
        s = math.sin(h)
        return cls(math.cos(h), a[0] * s, a[1] * s, a[2] * s)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    ortho = np.linalg.norm(R.T @ R - np.eye(3))
    return bool(ortho <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def skew(k) -> np.ndarray:
    k1, k2, k3 = k
    return np.array([[0.0, -k3, k2], [k3, 0.0, -k1], [-k2, k1, 0.0]])


def unproject(K: CameraIntrinsics, pixel) -> np.ndarray:
    """Ray through ``pixel`` as ``K^-1 (u, v, 1)``; the z component is 1."""
    u, v = pixel
    return np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])


def unproject_many(K: CameraIntrinsics, pixels) -> np.ndarray:
    px = np.asarray(pixels, dtype=float).reshape(-1, 2)
    out = np.ones((len(px), 3))
    out[:, 0] = (px[:, 0] - K.cx) / K.fx
    out[:, 1] = (px[:, 1] - K.cy) / K.fy
    return out


def ray_ground_point(ray, gravity, height: float) -> np.ndarray:
    """Point where ``ray`` meets the plane at ``height`` along ``gravity``.

    The unit ray is scaled by ``height / cos(theta)``, theta being the angle
    between ray and gravity, so the result's gravity component is ``height``.
    """
    r = np.asarray(ray, dtype=float)
    g = np.asarray(gravity, dtype=float)
    rn = np.linalg.norm(r)
    cos_t = float(r @ g) / (rn * np.linalg.norm(g))
    if cos_t <= EPS_COS:
        raise RayParallelToGround(f"ray does not reach the ground (cos theta = {cos_t:.3g})")
    return (height / cos_t) * (r / rn)


def rodrigues_align(m, n) -> np.ndarray:
    """Rotation taking the direction of ``m`` onto the direction of ``n``.

    R = I + [k]x + [k]x^2 / (1 + s) with k = m_hat x n_hat, s = m_hat . n_hat.
    """
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    mn, nn = np.linalg.norm(m), np.linalg.norm(n)
    if mn == 0.0 or nn == 0.0:
        raise ValueError("cannot align a zero vector")
    m = m / mn
    n = n / nn
    s = float(m @ n)
    if s <= -1.0 + EPS_ANTI:
        raise AntiparallelVectors(f"vectors are antiparallel (s = {s:.17g})")
    kx = skew(np.cross(m, n))
    return np.eye(3) + kx + (kx @ kx) / (1.0 + s)


def euler_from_rotation(R) -> EulerAngles:
    """Z-Y-X Euler angles (roll, pitch, yaw) with R = Rz(yaw) Ry(pitch) Rx(roll).

    Raises GimbalLock when |r31| is within EPS_GIMBAL of 1; the exception
    carries the degenerate decomposition with yaw fixed to zero.
    """
    R = np.asarray(R, dtype=float)
    r31 = R[2, 0]
    if abs(r31) >= 1.0 - EPS_GIMBAL:
        pitch = math.atan2(-r31, math.hypot(R[2, 1], R[2, 2]))
        roll = math.atan2(-R[1, 2], R[1, 1])
        raise GimbalLock(f"pitch at +-pi/2 (r31 = {r31:.17g})", EulerAngles(roll, pitch, 0.0))
    roll = math.atan2(R[2, 1], R[2, 2])
    pitch = math.atan2(-r31, math.sqrt(R[2, 1] ** 2 + R[2, 2] ** 2))
    yaw = math.atan2(R[1, 0], R[0, 0])
    return EulerAngles(roll, pitch, yaw)


def compose_euler(roll: float, pitch: float, yaw: float = 0.0) -> np.ndarray:
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def camera_to_world(roll: float, pitch: float, yaw: float = 0.0) -> np.ndarray:
    """Rotation taking camera-frame vectors into the gravity-aligned world frame."""
    return compose_euler(roll, pitch, yaw) @ CAMERA_TO_BODY
