"""Adaptive particle filter on a three-level roll/pitch grid.

Particles live on cell centres of nested grids (coarse level 1 to fine
level 3). IMU readings seed coarse particles every step; vision observations
reweight the set and spawn finer children near the observed attitude. Aged
fine particles fall back to coarser cells and very old ones are dropped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AllWeightsZero, EmptyFilter
from .geometry import OrientationRP
from .observation import Observation, Source

log = logging.getLogger(__name__)

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class ManifoldGrid:
    """Nested roll/pitch grids; level ``l`` cells are ``coarse_cell / refinement**(l-1)`` wide."""

    roll_range: tuple[float, float] = (-45 * _DEG, 45 * _DEG)
    pitch_range: tuple[float, float] = (-45 * _DEG, 45 * _DEG)
    coarse_cell: float = 2.0 * _DEG
    refinement: int = 4
    levels: int = 3

    def __post_init__(self):
        if self.coarse_cell <= 0 or self.refinement < 2 or self.levels < 1:
            raise ValueError("grid needs a positive cell size and integer refinement >= 2")
        for lo, hi in (self.roll_range, self.pitch_range):
            cells = (hi - lo) / self.coarse_cell
            if hi <= lo or abs(cells - round(cells)) > 1e-6:
                raise ValueError(f"range ({lo}, {hi}) is not a whole number of coarse cells")

    def cell_size(self, level) -> np.ndarray | float:
        return self.coarse_cell / np.power(float(self.refinement), np.asarray(level) - 1)

    def shape(self, level: int) -> tuple[int, int]:
        f = self.refinement ** (level - 1)
        nr = int(round((self.roll_range[1] - self.roll_range[0]) / self.coarse_cell)) * f
        npitch = int(round((self.pitch_range[1] - self.pitch_range[0]) / self.coarse_cell)) * f
        return nr, npitch

    def index(self, level: int, roll, pitch) -> tuple[np.ndarray, np.ndarray]:
        """Cell containing each (roll, pitch); values outside the ranges clip to the edge cells."""
        size = self.cell_size(level)
        nr, npitch = self.shape(level)
        i = np.floor((np.asarray(roll, dtype=float) - self.roll_range[0]) / size).astype(np.int64)
        j = np.floor((np.asarray(pitch, dtype=float) - self.pitch_range[0]) / size).astype(np.int64)
        return np.clip(i, 0, nr - 1), np.clip(j, 0, npitch - 1)

    def center(self, level, i, j) -> tuple[np.ndarray, np.ndarray]:
        size = self.cell_size(level)
        return (self.roll_range[0] + (np.asarray(i) + 0.5) * size,
                self.pitch_range[0] + (np.asarray(j) + 0.5) * size)

    def bounds(self, level, i, j):
        """(roll_lo, roll_hi, pitch_lo, pitch_hi) of each cell."""
        size = self.cell_size(level)
        r0 = self.roll_range[0] + np.asarray(i) * size
        p0 = self.pitch_range[0] + np.asarray(j) * size
        return r0, r0 + size, p0, p0 + size

    def parent(self, level, i, j):
        f = self.refinement
        return np.asarray(level) - 1, np.asarray(i) // f, np.asarray(j) // f


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 500
    m_children: int = 2
    spawn_radius: float = 1.0 * _DEG
    weight_sigma: float = 1.0 * _DEG
    coarsen_after: float = 2.0
    max_age: float = 6.0
    angular_rate: Optional[tuple[float, float]] = None
    rate_smoothing: float = 0.25
    imu_offset: float = 0.2 * _DEG
    resample_threshold: float = 0.5
    max_particles: Optional[int] = None
    seed: int = 0
    grid: ManifoldGrid = field(default_factory=ManifoldGrid)

    def __post_init__(self):
        if self.n_particles < 1 or self.m_children < 0:
            raise ValueError("n_particles must be >= 1 and m_children >= 0")
        if not (self.spawn_radius > 0 and self.weight_sigma > 0):
            raise ValueError("spawn_radius and weight_sigma must be positive")
        if not (0 < self.coarsen_after and 0 < self.max_age):
            raise ValueError("lifetimes must be positive")
        if self.imu_offset < 0:
            raise ValueError("imu_offset must be >= 0")
        if not 0 < self.resample_threshold <= 1:
            raise ValueError("resample_threshold must lie in (0, 1]")

    @property
    def particle_cap(self) -> int:
        return self.max_particles if self.max_particles is not None else 4 * self.n_particles


@dataclass(frozen=True)
class Particle:
    level: int
    roll_index: int
    pitch_index: int
    weight: float
    birth_time: float
    center: OrientationRP


@dataclass(frozen=True)
class FusedEstimate:
    value: OrientationRP
    timestamp: float
    effective_sample_size: float


def angular_distance(a, b):
    """Euclidean distance on the (roll, pitch) chart; broadcasts over arrays."""
    return np.hypot(np.subtract(a[0], b[0]), np.subtract(a[1], b[1]))


def fuse_cv(c1: Observation, c2: Observation) -> tuple[OrientationRP, float]:
    """Inverse-variance fusion of two vision observations, per axis.

    Returns the fused mean delta_f * (mu1/delta1 + mu2/delta2) and the fused
    variance delta_f = (1/delta1 + 1/delta2)^-1.
    """
    p1, p2 = 1.0 / c1.variance, 1.0 / c2.variance
    var = 1.0 / (p1 + p2)
    mean = OrientationRP(
        var * (c1.value.roll * p1 + c2.value.roll * p2),
        var * (c1.value.pitch * p1 + c2.value.pitch * p2),
    )
    return mean, var


def systematic_resample(weights, count: int, offset: float) -> np.ndarray:
    """Indices drawn at positions offset + i/count over the cumulative weights.

    ``offset`` must lie in [0, 1/count).
    """
    w = np.asarray(weights, dtype=float)
    cum = np.cumsum(w)
    cum /= cum[-1]
    positions = offset + np.arange(count) / count
    return np.minimum(np.searchsorted(cum, positions, side="right"), len(w) - 1)


class ManifoldParticleFilter:
    """Particle set plus the bookkeeping the control flow needs.

    All randomness comes from one generator seeded by ``config.seed``.
    """

    def __init__(self, config: FilterConfig = FilterConfig()):
        self.config = config
        self.grid = config.grid
        self.rng = np.random.default_rng(config.seed)
        self.level = np.zeros(0, dtype=np.int8)
        self.ri = np.zeros(0, dtype=np.int64)
        self.pi = np.zeros(0, dtype=np.int64)
        self.weight = np.zeros(0)
        self.birth = np.zeros(0)
        self.time: Optional[float] = None
        self.history: list[FusedEstimate] = []
        self.rate = (0.0, 0.0)
        self.events: list[str] = []

    def __len__(self):
        return len(self.weight)

    # --- particle set helpers -------------------------------------------------

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.center(self.level, self.ri, self.pi)

    def particles(self) -> list[Particle]:
        r, p = self.centers()
        return [
            Particle(int(l), int(i), int(j), float(w), float(b), OrientationRP(float(x), float(y)))
            for l, i, j, w, b, x, y in zip(self.level, self.ri, self.pi, self.weight, self.birth, r, p)
        ]

    def set_particles(self, level, ri, pi, weight, birth) -> None:
        self.level = np.asarray(level, dtype=np.int8).copy()
        self.ri = np.asarray(ri, dtype=np.int64).copy()
        self.pi = np.asarray(pi, dtype=np.int64).copy()
        self.weight = np.asarray(weight, dtype=float).copy()
        self.birth = np.asarray(birth, dtype=float).copy()

    def _append(self, level: int, ri, pi, weight, birth: float) -> None:
        n = len(ri)
        self.level = np.concatenate([self.level, np.full(n, level, dtype=np.int8)])
        self.ri = np.concatenate([self.ri, ri])
        self.pi = np.concatenate([self.pi, pi])
        self.weight = np.concatenate([self.weight, weight])
        self.birth = np.concatenate([self.birth, np.full(n, birth)])

    def _keep(self, mask) -> None:
        self.level = self.level[mask]
        self.ri = self.ri[mask]
        self.pi = self.pi[mask]
        self.weight = self.weight[mask]
        self.birth = self.birth[mask]

    def _normalize(self) -> None:
        total = self.weight.sum()
        if len(self.weight) and total > 0:
            self.weight = self.weight / total

    def _draw(self, level: int, mean: OrientationRP, std: float, n: int):
        xy = self.rng.standard_normal((n, 2)) * std
        return self.grid.index(level, mean[0] + xy[:, 0], mean[1] + xy[:, 1])

    def angular_rate(self) -> tuple[float, float]:
        if self.config.angular_rate is not None:
            return self.config.angular_rate
        return self.rate

    def _update_rate(self) -> None:
        """Low-pass the finite difference of the last two outputs."""
        if len(self.history) < 2:
            return
        a, b = self.history[-2], self.history[-1]
        span = b.timestamp - a.timestamp
        if span <= 0:
            return
        raw = ((b.value.roll - a.value.roll) / span, (b.value.pitch - a.value.pitch) / span)
        tau = self.config.rate_smoothing
        k = 1.0 if tau <= 0 else 1.0 - math.exp(-span / tau)
        self.rate = tuple(r + k * (x - r) for r, x in zip(self.rate, raw))

    # --- filter operations ----------------------------------------------------

    def predict(self, imu: Observation, dt: float) -> "ManifoldParticleFilter":
        """Propagate the set by the angular rate over ``dt`` and add N coarse
        particles drawn around the IMU reading propagated the same way.

        Existing particles keep their level and move to the cell holding their
        shifted centre; new ones enter with the mean weight of the current set.
        """
        if imu.source is not Source.IMU:
            raise ValueError(f"predict needs an IMU observation, got {imu.source}")
        cfg = self.config
        w_roll, w_pitch = self.angular_rate()
        mean = OrientationRP(imu.value.roll + w_roll * dt, imu.value.pitch + w_pitch * dt)
        if len(self) and dt > 0 and (w_roll or w_pitch):
            r, p = self.centers()
            for lv in np.unique(self.level):
                sel = self.level == lv
                self.ri[sel], self.pi[sel] = self.grid.index(int(lv), r[sel] + w_roll * dt, p[sel] + w_pitch * dt)
        std = math.sqrt(imu.variance) + cfg.imu_offset
        ri, pi = self._draw(1, mean, std, cfg.n_particles)
        w_new = self.weight.mean() if len(self.weight) else 1.0 / cfg.n_particles
        self._append(1, ri, pi, np.full(cfg.n_particles, w_new), imu.timestamp)
        self._normalize()
        self.time = imu.timestamp
        return self

    def update(self, c1: Optional[Observation] = None, c2: Optional[Observation] = None) -> "ManifoldParticleFilter":
        """Reweight by a Gaussian kernel of distance to the vision observation(s) and spawn children.

        With both observations the target is their fused mean and children land
        on level-3 cells; with one, the observation itself and level 2.
        """
        obs = [o for o in (c1, c2) if o is not None]
        if not obs:
            raise ValueError("update needs at least one vision observation")
        if len(obs) == 2:
            target, var = fuse_cv(obs[0], obs[1])
            level = 3
        else:
            target, var = obs[0].value, obs[0].variance
            level = 2
        now = max(o.timestamp for o in obs)
        cfg = self.config
        two_s2 = 2.0 * cfg.weight_sigma**2

        d = angular_distance(self.centers(), target)
        w = self.weight * np.exp(-(d * d) / two_s2)
        total = w.sum()
        if not (np.isfinite(total) and total > 0):
            self._reinitialize(target, var, level, now, AllWeightsZero("all particle weights underflowed"))
            return self
        self.weight = w

        parents = np.flatnonzero(d <= cfg.spawn_radius)
        if len(parents) == 0:
            # the set has lost the observation: nothing can spawn near it
            self._reinitialize(target, var, level, now, AllWeightsZero("no particle within the spawn radius"))
            return self
        if cfg.m_children:
            n = len(parents) * cfg.m_children
            ri, pi = self._draw(level, target, math.sqrt(var), n)
            cr, cp = self.grid.center(level, ri, pi)
            dc = angular_distance((cr, cp), target)
            wc = np.repeat(w[parents], cfg.m_children) * np.exp(-(dc * dc) / two_s2)
            self._append(level, ri, pi, wc, now)
        self._normalize()
        return self

    def _reinitialize(self, target, var, level, now, reason) -> None:
        n = self.config.n_particles
        ri, pi = self._draw(level, target, math.sqrt(var), n)
        self.set_particles(np.full(n, level), ri, pi, np.full(n, 1.0 / n), np.full(n, now))
        msg = f"t={now:.3f}: {type(reason).__name__}: {reason}; reinitialized {n} particles at level {level}"
        self.events.append(msg)
        log.info(msg)

    def maintain_lifetime(self, now: float) -> "ManifoldParticleFilter":
        """Drop particles older than max_age, then move particles older than
        coarsen_after up one level (birth time reset)."""
        cfg = self.config
        age = now - self.birth
        alive = age <= cfg.max_age
        if not alive.all():
            self._keep(alive)
            age = age[alive]
        demote = (age > cfg.coarsen_after) & (self.level > 1)
        if demote.any():
            lv, i, j = self.grid.parent(self.level[demote], self.ri[demote], self.pi[demote])
            self.level[demote] = lv
            self.ri[demote] = i
            self.pi[demote] = j
            self.birth[demote] = now
        self._normalize()
        return self

    def effective_sample_size(self) -> float:
        w = self.weight
        s2 = float(w @ w)
        return float(w.sum() ** 2 / s2) if s2 > 0 else 0.0

    def resample(self, offset: Optional[float] = None) -> "ManifoldParticleFilter":
        """Systematic resampling down to N particles.

        Runs when the effective sample size drops below
        ``resample_threshold * count`` or the set exceeds the particle cap.
        """
        cfg = self.config
        m = len(self)
        if m == 0:
            return self
        if self.effective_sample_size() >= cfg.resample_threshold * m and m <= cfg.particle_cap:
            return self
        n = cfg.n_particles
        if offset is None:
            offset = self.rng.uniform(0.0, 1.0 / n)
        idx = systematic_resample(self.weight, n, offset)
        self.set_particles(self.level[idx], self.ri[idx], self.pi[idx], np.full(n, 1.0 / n), self.birth[idx])
        return self

    def estimate(self) -> FusedEstimate:
        total = self.weight.sum() if len(self) else 0.0
        if not total > 0:
            raise EmptyFilter("no particle carries positive weight")
        w = self.weight / total
        r, p = self.centers()
        value = OrientationRP(float(w @ r), float(w @ p))
        return FusedEstimate(value, self.time if self.time is not None else 0.0, self.effective_sample_size())

    def step(self, imu: Observation, c1: Optional[Observation] = None,
             c2: Optional[Observation] = None, now: Optional[float] = None) -> FusedEstimate:
        """predict -> update (if any vision observation) -> lifetime -> resample -> estimate."""
        now = imu.timestamp if now is None else now
        dt = 0.0 if self.time is None else now - self.time
        self.predict(imu, dt)
        if c1 is not None or c2 is not None:
            self.update(c1, c2)
        self.time = now
        self.maintain_lifetime(now)
        self.resample()
        est = self.estimate()
        self.history.append(est)
        if len(self.history) > 2:
            del self.history[0]
        self._update_rate()
        return est
