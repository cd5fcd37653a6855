from __future__ import annotations

import enum
from dataclasses import dataclass

from .geometry import OrientationRP


class Source(enum.Enum):
    IMU = "imu"
    SKYLINE = "skyline"
    GROUND_PLANE = "ground"


@dataclass(frozen=True)
class Observation:
    """Roll/pitch measurement from one source.

    ``variance`` is per axis (rad^2) and applies to roll and pitch alike.
    """

    source: Source
    value: OrientationRP
    variance: float
    timestamp: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"observation variance must be positive, got {self.variance}")
        if not isinstance(self.value, OrientationRP):
            object.__setattr__(self, "value", OrientationRP(*self.value))


@dataclass(frozen=True)
class Untrackable:
    """A frame a tracker could not measure; ``reason`` names the failed step."""

    source: Source
    timestamp: float
    reason: str

    def __bool__(self):
        return False
