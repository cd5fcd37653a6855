"""Exception hierarchy shared by the trackers, the filter and the CLI."""


class SkyposeError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(SkyposeError):
    pass


class RayParallelToGround(GeometryError):
    """The ray never meets the ground plane (cos of the gravity angle too small)."""


class AntiparallelVectors(GeometryError):
    """Rodrigues alignment is singular for opposite vectors."""


class GimbalLock(GeometryError):
    """Euler extraction is ambiguous; ``angles`` holds the decomposition with yaw = 0."""

    def __init__(self, message, angles):
        super().__init__(message)
        self.angles = angles


class TrackingError(SkyposeError):
    """Base for conditions that make a frame untrackable."""


class NoBoundaryFound(TrackingError):
    pass


class DegenerateColumnSet(TrackingError):
    pass


class InsufficientGroundRegion(TrackingError):
    pass


class CollinearPoints(TrackingError):
    pass


class FilterError(SkyposeError):
    pass


class EmptyFilter(FilterError):
    pass


class AllWeightsZero(FilterError):
    pass


class EmptySeries(SkyposeError):
    pass


class ConfigError(SkyposeError):
    """Malformed or incomplete configuration file."""


class DataError(SkyposeError):
    """Missing, corrupt or mismatched stream/mask files."""
