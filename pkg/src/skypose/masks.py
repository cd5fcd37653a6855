"""Binary sky/ground masks and their PGM (P5) file format.

On disk a mask is a binary PGM with maxval 255, one byte per pixel:
0 = GROUND, 255 = SKY. In memory it is a boolean array, True = SKY.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

SKY = True
GROUND = False

_PGM_SKY = 255
_PGM_GROUND = 0


@dataclass(frozen=True, eq=False)
class BinaryMask:
    sky: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.sky, dtype=bool)
        if a.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {a.shape}")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "sky", a)

    @property
    def height(self) -> int:
        return self.sky.shape[0]

    @property
    def width(self) -> int:
        return self.sky.shape[1]

    @classmethod
    def full(cls, width: int, height: int, value: bool) -> "BinaryMask":
        return cls(np.full((height, width), value, dtype=bool))

    @classmethod
    def horizontal(cls, width: int, height: int, row: int) -> "BinaryMask":
        """SKY above ``row``, GROUND from ``row`` down."""
        sky = np.zeros((height, width), dtype=bool)
        sky[:row] = True
        return cls(sky)

    @property
    def ground(self) -> np.ndarray:
        return ~self.sky

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.sky.shape == other.sky.shape and bool(np.array_equal(self.sky, other.sky))

    def __hash__(self):
        return hash((self.sky.shape, self.sky.tobytes()))


def write_pgm(path, mask: BinaryMask) -> None:
    data = np.where(mask.sky, _PGM_SKY, _PGM_GROUND).astype(np.uint8)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path) -> BinaryMask:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read mask {path}: {exc}") from exc
    m = _HEADER.match(raw)
    if m is None:
        raise DataError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise DataError(f"{path}: expected maxval 255, got {maxval}")
    body = raw[m.end():]
    if len(body) != w * h:
        raise DataError(f"{path}: expected {w * h} pixel bytes, found {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    bad = (pixels != _PGM_SKY) & (pixels != _PGM_GROUND)
    if bad.any():
        raise DataError(f"{path}: pixel values other than 0/255 present")
    return BinaryMask(pixels == _PGM_SKY)
