"""Scenario files: flat ``key = value`` configs, CSV streams and the on-disk layout.

Angles are stored in radians, heights in meters and times in seconds.
Config keys carry their unit in the name; degrees there are for humans only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .geometry import CameraIntrinsics, OrientationRP
from .masks import read_pgm, write_pgm
from .observation import Observation, Source
from .simulator import Pattern, SensorNoiseModel, Trajectory

REQUIRED_KEYS = ("seed", "pattern", "speed_deg_s", "duration_s")

TRUTH_HEADER = ("t", "roll", "pitch", "height")
IMU_HEADER = ("t", "roll", "pitch", "var")
BARO_HEADER = ("t", "height")

CONFIG_FILE = "scenario.cfg"
TRUTH_FILE = "truth.csv"
IMU_FILE = "imu.csv"
BARO_FILE = "baro.csv"
MASK_DIR = "masks"


def fmt(x) -> str:
    """Shortest round-tripping text for floats; ints and strings unchanged."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    pattern: str
    speed_deg_s: float
    duration_s: float
    name: str = "scenario"
    rate_hz: float = 20.0
    altitude_m: float = 400.0
    image_width: int = 640
    image_height: int = 480
    fx: float = 500.0
    fy: float = 500.0
    cx: float = math.nan
    cy: float = math.nan
    imu_sigma_deg: float = 1.0
    imu_bias_rate_deg_s: float = 0.3
    baro_sigma_m: float = 0.5
    skyline_sigma_deg: float = 0.5
    ground_sigma_deg: float = 0.8

    def __post_init__(self):
        try:
            Pattern(self.pattern)
        except ValueError:
            raise ConfigError(f"pattern must be one of {[p.value for p in Pattern]}, got {self.pattern!r}")
        if not self.name or any(c in self.name for c in "/\\") or self.name in (".", ".."):
            raise ConfigError(f"name {self.name!r} is not a plain directory name")
        for key in ("speed_deg_s", "duration_s", "imu_sigma_deg", "baro_sigma_m",
                    "skyline_sigma_deg", "ground_sigma_deg"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{key} must be finite and >= 0, got {v}")
        for key in ("rate_hz", "altitude_m", "fx", "fy"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{key} must be finite and > 0, got {v}")
        if self.image_width < 2 or self.image_height < 2:
            raise ConfigError("image must be at least 2x2 pixels")
        if math.isnan(self.cx):
            object.__setattr__(self, "cx", self.image_width / 2.0)
        if math.isnan(self.cy):
            object.__setattr__(self, "cy", self.image_height / 2.0)

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy)

    @property
    def size(self) -> tuple[int, int]:
        return self.image_width, self.image_height

    def noise_model(self, seed: int | None = None) -> SensorNoiseModel:
        return SensorNoiseModel(
            imu_sigma=math.radians(self.imu_sigma_deg),
            imu_bias_rate=math.radians(self.imu_bias_rate_deg_s),
            baro_sigma=self.baro_sigma_m,
            seed=self.seed if seed is None else seed,
            skyline_sigma=math.radians(self.skyline_sigma_deg),
            ground_sigma=math.radians(self.ground_sigma_deg),
        )

    def render(self) -> str:
        """Canonical text form; parse_config(render()) gives back an equal config."""
        return "".join(f"{k} = {fmt(v)}\n" for k, v in asdict(self).items())


_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Errors name the line."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad {_TYPES[key]} value {raw!r} for {key!r}") from None
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")
    try:
        return ScenarioConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    return parse_config(text, str(path))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def read_csv(path, header) -> np.ndarray:
    """Numeric table with exactly ``header`` as its columns; shape (rows, len(header))."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: cannot read: {exc}") from None
    if not rows or tuple(rows[0]) != tuple(header):
        raise DataError(f"{path}: expected header {','.join(header)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    data = data.reshape(-1, len(header))
    if any(len(r) != len(header) for r in rows[1:]):
        raise DataError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    return data


def read_rows(path) -> tuple[list[str], list[dict]]:
    """Header and rows as dicts of strings, for loosely typed tables like summaries."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            header = list(reader.fieldnames or [])
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"{path}: cannot read: {exc}") from None
    return header, rows


def mask_path(directory, index: int) -> Path:
    return Path(directory) / MASK_DIR / f"frame_{index:06d}.pgm"


@dataclass
class Scenario:
    config: ScenarioConfig
    truth: Trajectory
    imu: list
    baro: np.ndarray  # (n, 2): t, height
    masks: list


def write_scenario(directory, config: ScenarioConfig, truth: Trajectory, imu, baro, masks) -> Path:
    d = Path(directory)
    (d / MASK_DIR).mkdir(parents=True, exist_ok=True)
    for old in (d / MASK_DIR).glob("frame_*.pgm"):
        old.unlink()
    (d / CONFIG_FILE).write_text(config.render())
    write_csv(d / TRUTH_FILE, TRUTH_HEADER, zip(truth.t, truth.roll, truth.pitch, truth.height))
    write_csv(d / IMU_FILE, IMU_HEADER,
              ((o.timestamp, o.value.roll, o.value.pitch, o.variance) for o in imu))
    write_csv(d / BARO_FILE, BARO_HEADER, baro)
    for i, m in enumerate(masks):
        write_pgm(mask_path(d, i), m)
    return d


def read_scenario(directory) -> Scenario:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"{d}: scenario directory not found")
    cfg_path = d / CONFIG_FILE
    if not cfg_path.is_file():
        raise DataError(f"{cfg_path}: missing")
    config = load_config(cfg_path)
    tr = read_csv(d / TRUTH_FILE, TRUTH_HEADER)
    im = read_csv(d / IMU_FILE, IMU_HEADER)
    ba = read_csv(d / BARO_FILE, BARO_HEADER)
    n = len(tr)
    if len(im) != n or len(ba) != n:
        raise DataError(f"{d}: stream lengths differ (truth {n}, imu {len(im)}, baro {len(ba)})")
    if not (np.array_equal(tr[:, 0], im[:, 0]) and np.array_equal(tr[:, 0], ba[:, 0])):
        raise DataError(f"{d}: stream timestamps differ")
    if np.any(im[:, 3] <= 0):
        raise DataError(f"{d / IMU_FILE}: variance must be positive")
    try:
        truth = Trajectory(tr[:, 0], tr[:, 1], tr[:, 2], tr[:, 3])
    except ValueError as exc:
        raise DataError(f"{d / TRUTH_FILE}: {exc}") from None
    imu = [Observation(Source.IMU, OrientationRP(float(r), float(p)), float(v), float(t))
           for t, r, p, v in im]
    files = sorted((d / MASK_DIR).glob("frame_*.pgm")) if (d / MASK_DIR).is_dir() else []
    if len(files) != n:
        raise DataError(f"{d / MASK_DIR}: expected {n} mask files, found {len(files)}")
    masks = []
    for i in range(n):
        m = read_pgm(mask_path(d, i))
        if (m.width, m.height) != config.size:
            raise DataError(f"{mask_path(d, i)}: size {m.width}x{m.height} differs from config")
        masks.append(m)
    return Scenario(config, truth, imu, ba, masks)
