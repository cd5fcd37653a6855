import math

import numpy as np
import pytest
from hypothesis import settings

from skypose.geometry import CameraIntrinsics

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

DEG = math.pi / 180.0


@pytest.fixture
def K():
    return CameraIntrinsics(500.0, 500.0, 320.0, 240.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def quat_mul(a, b):
    """Hamilton product of [w, x, y, z] arrays."""
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
