"""Roll and pitch from sky/ground masks, fused with IMU readings on a multi-resolution grid."""

from .errors import SkyposeError
from .evaluation import compute_rmse, detect_failure
from .filter import FilterConfig, ManifoldParticleFilter, fuse_cv, systematic_resample
from .geometry import CameraIntrinsics, OrientationRP, euler_from_rotation, rodrigues_align
from .groundplane import GroundPlaneTracker
from .masks import BinaryMask, read_pgm, write_pgm
from .observation import Observation, Source, Untrackable
from .simulator import Pattern, make_trajectory, render_mask
from .skyline import SkylineTracker

__all__ = [
    "BinaryMask", "CameraIntrinsics", "FilterConfig", "GroundPlaneTracker",
    "ManifoldParticleFilter", "Observation", "OrientationRP", "Pattern",
    "SkyposeError", "SkylineTracker", "Source", "Untrackable",
    "compute_rmse", "detect_failure", "euler_from_rotation", "fuse_cv",
    "make_trajectory", "read_pgm", "render_mask", "rodrigues_align",
    "systematic_resample", "write_pgm",
]
