"""Particle traffic flows: world lines over a box, snapshots, and thinning.

Vehicles are thrown into a box state space by a counting law and moved by
a motion kernel; querying the system at time t forms the image random
measure with counts N_t(A) over subspaces.  Birth/death adds arrival
times and exponential lifetimes, with dead particles absorbed by a
cemetery.  The counting family's dispersion gap fixes the sign of count
covariances across disjoint regions, and restriction to a region thins
the counting law by the region's normalized mean mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from . import stats, streams
from .counting import CountingLaw
from .errors import DisjointnessError, NullRestrictionError
from .spatial import Box, IntervalUnion, Law1D, ProductLaw

_GL_NODES = 128

# stream roles for bulk snapshots
_R_COUNT, _R_X, _R_ARRIVAL, _R_LIFE, _R_MOTION = range(5)


@dataclass(frozen=True)
class UniformWindow:
    """Arrival-time law: uniform on [start, end], or a point mass if equal."""

    start: float
    end: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("window end precedes start")

    @property
    def width(self) -> float:
        return self.end - self.start

    def ppf(self, u):
        return self.start + np.asarray(u) * self.width

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))


class MotionKernel:
    """Shared surface for world-line kernels; positions stay in the box."""

    analytic: bool = False
    n_uniforms: int = 0

    def move(self, x0: np.ndarray, ages: np.ndarray, box: Box, rng) -> np.ndarray:
        raise NotImplementedError

    def move_from_uniforms(
        self, x0: np.ndarray, ages: np.ndarray, box: Box, u: np.ndarray
    ) -> np.ndarray:
        raise NotImplementedError

    def axis_interval_prob(self, x0, age, interval, axis_bounds) -> np.ndarray:
        """P(position_axis in interval | start x0) when analytic."""
        raise NotImplementedError


def _fold(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Reflect positions into [lo, hi] (triangle-wave folding)."""
    span = hi - lo
    d = np.mod(x - lo, 2.0 * span)
    return lo + np.minimum(d, 2.0 * span - d)


@dataclass(frozen=True)
class BrownianMotion(MotionKernel):
    """Per-axis Brownian motion reflected at the box walls."""

    sigma: float

    analytic = True

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def n_uniforms(self) -> int:  # one normal per axis, allocated by caller
        return 3

    def _scaled(self, ages) -> np.ndarray:
        return self.sigma * np.sqrt(np.asarray(ages, dtype=float))

    def move(self, x0, ages, box, rng):
        x0 = np.atleast_2d(x0)
        z = rng.standard_normal(x0.shape)
        return self._apply(x0, ages, box, z)

    def move_from_uniforms(self, x0, ages, box, u):
        from scipy.special import ndtri

        x0 = np.atleast_2d(x0)
        z = ndtri(u[:, : x0.shape[1]])
        return self._apply(x0, ages, box, z)

    def _apply(self, x0, ages, box, z):
        s = self._scaled(ages)[:, None]
        out = np.empty_like(x0, dtype=float)
        for axis in range(x0.shape[1]):
            lo, hi = box.axis_interval(axis)
            out[:, axis] = _fold(x0[:, axis] + s[:, 0] * z[:, axis], lo, hi)
        return out

    def axis_interval_prob(self, x0, age, interval, axis_bounds):
        """Reflected transition probability by the image expansion."""
        lo, hi = axis_bounds
        a, b = interval
        span = hi - lo
        s = self.sigma * math.sqrt(age)
        if s == 0.0:
            x0 = np.asarray(x0, dtype=float)
            return ((x0 > a) & (x0 <= b)).astype(float)
        x = np.asarray(x0, dtype=float) - lo
        a, b = a - lo, b - lo
        k_max = int(np.ceil((6.0 * s + span) / (2.0 * span))) + 1
        total = np.zeros_like(x)
        for k in range(-k_max, k_max + 1):
            shift = 2.0 * k * span
            total += ndtr((b - x + shift) / s) - ndtr((a - x + shift) / s)
            total += ndtr((b + x + shift) / s) - ndtr((a + x + shift) / s)
        return np.clip(total, 0.0, 1.0)


@dataclass(frozen=True)
class CircularOrbit(MotionKernel):
    """Rotation about the box center in the x-y plane at angular speed omega.

    ``omega`` is a rate or a finite mixture ((value, prob), ...); the
    orbit radius is set by the initial point, so initial laws must stay
    inside the inscribed circle.
    """

    omega: float | tuple[tuple[float, float], ...]

    analytic = True
    n_uniforms = 1

    def _mixture(self) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(self.omega, (int, float)):
            return np.array([float(self.omega)]), np.array([1.0])
        vals = np.array([v for v, _ in self.omega], dtype=float)
        probs = np.array([p for _, p in self.omega], dtype=float)
        if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
            raise ValueError("omega mixture probabilities must sum to 1")
        return vals, probs

    @staticmethod
    def _center(box: Box) -> np.ndarray:
        return (np.asarray(box.lo[:2]) + np.asarray(box.hi[:2])) / 2.0

    @staticmethod
    def _check_radius(rel: np.ndarray, box: Box):
        half = min((h - l) / 2.0 for l, h in zip(box.lo[:2], box.hi[:2]))
        if np.any(np.hypot(rel[:, 0], rel[:, 1]) > half + 1e-12):
            raise ValueError(
                "orbit radius exceeds the inscribed circle; shrink the initial law"
            )

    def _rotate(self, x0: np.ndarray, angles: np.ndarray, box: Box) -> np.ndarray:
        out = np.array(np.atleast_2d(x0), dtype=float, copy=True)
        center = self._center(box)
        rel = out[:, :2] - center
        self._check_radius(rel, box)
        cos, sin = np.cos(angles), np.sin(angles)
        out[:, 0] = center[0] + cos * rel[:, 0] - sin * rel[:, 1]
        out[:, 1] = center[1] + sin * rel[:, 0] + cos * rel[:, 1]
        return out

    def _draw_omega(self, u: np.ndarray) -> np.ndarray:
        vals, probs = self._mixture()
        return vals[np.searchsorted(np.cumsum(probs), u, side="left").clip(0, vals.size - 1)]

    def move(self, x0, ages, box, rng):
        omega = self._draw_omega(rng.random(np.atleast_2d(x0).shape[0]))
        return self._rotate(x0, omega * np.asarray(ages, dtype=float), box)

    def move_from_uniforms(self, x0, ages, box, u):
        omega = self._draw_omega(u[:, 0])
        return self._rotate(x0, omega * np.asarray(ages, dtype=float), box)


@dataclass(frozen=True)
class RandomWaypoint(MotionKernel):
    """Waypoint hopping at constant speed; simulation-only (no analytic law)."""

    speed: float

    analytic = False

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")

    def move(self, x0, ages, box, rng):
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        ages = np.broadcast_to(np.asarray(ages, dtype=float), x0.shape[0])
        lo = np.asarray(box.lo)
        hi = np.asarray(box.hi)
        out = np.empty_like(x0)
        for i in range(x0.shape[0]):
            pos = x0[i].copy()
            remaining = float(ages[i])
            while remaining > 0.0:
                target = lo + rng.random(lo.size) * (hi - lo)
                leg = np.linalg.norm(target - pos)
                hop_time = leg / self.speed
                if hop_time >= remaining:
                    pos = pos + (target - pos) * (remaining * self.speed / leg)
                    break
                pos = target
                remaining -= hop_time
            out[i] = pos
        return out


@dataclass(frozen=True)
class TrafficConfig:
    """A particle system: counting law, box, initial law, motion, lifecycle."""

    counting: CountingLaw
    box: Box
    motion: MotionKernel
    query_time: float
    initial_law: ProductLaw | None = None
    arrivals: UniformWindow | None = None
    lifetime_rate: float | None = None

    def __post_init__(self):
        if self.query_time < 0:
            raise ValueError("query time must be non-negative")
        if self.lifetime_rate is not None:
            if self.arrivals is None:
                raise ValueError("lifetimes need birth/death mode (set arrivals)")
            if self.lifetime_rate <= 0:
                raise ValueError("lifetime rate must be positive")
        if self.initial_law is not None and self.initial_law.dimension != self.box.dim:
            raise ValueError("initial law dimension must match the box")

    @property
    def nu(self) -> ProductLaw:
        return self.initial_law or ProductLaw.uniform_on(self.box)

    @property
    def birth_death(self) -> bool:
        return self.arrivals is not None


@dataclass(frozen=True)
class Snapshot:
    time: float
    positions: np.ndarray  # (count, dim)
    count: int


def simulate_snapshot(config: TrafficConfig, rng: np.random.Generator) -> Snapshot:
    """One realized snapshot at the query time (Generator path)."""
    t = config.query_time
    k = int(config.counting.sample(rng))
    if k == 0:
        return Snapshot(t, np.empty((0, config.box.dim)), 0)
    x0 = np.atleast_2d(config.nu.sample(rng, k))
    if config.birth_death:
        births = np.asarray(config.arrivals.sample(rng, k), dtype=float)
        alive = births <= t
        if config.lifetime_rate is not None:
            lifetimes = rng.exponential(1.0 / config.lifetime_rate, k)
            alive &= lifetimes > (t - births)
        x0 = x0[alive]
        ages = (t - births)[alive]
    else:
        ages = np.full(x0.shape[0], t)
    if x0.shape[0] == 0:
        return Snapshot(t, np.empty((0, config.box.dim)), 0)
    pos = config.motion.move(x0, ages, config.box, rng)
    return Snapshot(t, pos, pos.shape[0])


def _bulk_positions(config: TrafficConfig, seed: int, n_rep: int, rep_lo: int = 0):
    """Replicate ids and survivor positions for n_rep seeded snapshots."""
    t = config.query_time
    reps = np.arange(rep_lo, rep_lo + n_rep, dtype=np.int64)
    counts = config.counting.ppf(streams.uniforms(seed, reps, _R_COUNT, 0))
    total = int(counts.sum())
    rep_ids = np.repeat(reps, counts)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    within = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts)
    dim = config.box.dim
    u_x = np.stack(
        [streams.uniforms(seed, rep_ids, _R_X, within, a) for a in range(dim)], axis=-1
    )
    x0 = config.nu.ppf(u_x)
    if config.birth_death:
        births = config.arrivals.ppf(streams.uniforms(seed, rep_ids, _R_ARRIVAL, within))
        alive = births <= t
        if config.lifetime_rate is not None:
            u_life = streams.uniforms(seed, rep_ids, _R_LIFE, within)
            lifetimes = -np.log1p(-u_life) / config.lifetime_rate
            alive &= lifetimes > (t - births)
        ages = (t - births)[alive]
        x0 = x0[alive]
        rep_ids = rep_ids[alive]
        within = within[alive]
    else:
        ages = np.full(x0.shape[0], float(t))
    n_u = max(config.motion.n_uniforms, 1)
    u_m = np.stack(
        [streams.uniforms(seed, rep_ids, _R_MOTION, within, j) for j in range(n_u)],
        axis=-1,
    )
    pos = config.motion.move_from_uniforms(x0, ages, config.box, u_m)
    return rep_ids, pos


def region_counts_bulk(
    config: TrafficConfig,
    regions: Sequence[Box],
    seed: int,
    n_rep: int,
    rep_lo: int = 0,
) -> np.ndarray:
    """(n_rep, len(regions)+1) counts; the last column counts all survivors."""
    rep_ids, pos = _bulk_positions(config, seed, n_rep, rep_lo)
    rel = rep_ids - rep_lo
    out = np.empty((n_rep, len(regions) + 1), dtype=np.int64)
    for j, region in enumerate(regions):
        mask = region.contains(pos)
        out[:, j] = np.bincount(rel[mask], minlength=n_rep)
    out[:, -1] = np.bincount(rel, minlength=n_rep)
    return out


@dataclass(frozen=True)
class MeanMeasureResult:
    value: float
    stderr: float | None
    method: str  # "analytic" or "mc"


def _axis_positional_prob(
    config: TrafficConfig, age: float, region: Box | None
) -> float:
    """P(moved point lands in region | age) under the initial law."""
    motion, box = config.motion, config.box
    if region is None:
        region = box
    if age == 0.0:
        prob = 1.0
        for axis, law in enumerate(config.nu.axes):
            prob *= law.mass(IntervalUnion.from_pairs(region.axis_interval(axis)))
        return prob
    if isinstance(motion, BrownianMotion):
        prob = 1.0
        for axis, law in enumerate(config.nu.axes):
            interval = region.axis_interval(axis)
            bounds = box.axis_interval(axis)
            prob *= law.integrate(
                lambda x0, iv=interval, bd=bounds: motion.axis_interval_prob(
                    x0, age, iv, bd
                )
            )
        return prob
    if isinstance(motion, CircularOrbit):
        vals, probs = motion._mixture()
        xy = _orbit_xy_prob(config, age, region, vals, probs)
        tail = 1.0
        for axis in range(2, box.dim):
            tail *= config.nu.axes[axis].mass(
                IntervalUnion.from_pairs(region.axis_interval(axis))
            )
        return xy * tail
    raise NotImplementedError


def _orbit_xy_prob(config, age, region, omegas, probs, cells: int = 256) -> float:
    """Quadrature of the rotated initial law over the region's x-y face."""
    law_x, law_y = config.nu.axes[0], config.nu.axes[1]

    def axis_cells(law: Law1D):
        nodes = law.quad_grid()
        mids = (nodes[:-1] + nodes[1:]) / 2.0
        masses = np.diff(law.cdf(nodes))
        return mids, masses

    mx, wx = axis_cells(law_x)
    my, wy = axis_cells(law_y)
    pts = np.column_stack(
        [np.repeat(mx, my.size), np.tile(my, mx.size)]
    )
    weights = np.repeat(wx, my.size) * np.tile(wy, mx.size)
    total = 0.0
    rx = region.axis_interval(0)
    ry = region.axis_interval(1)
    for omega, p in zip(omegas, probs):
        kernel = CircularOrbit(float(omega))
        moved = kernel._rotate(pts, np.full(pts.shape[0], omega * age), config.box)
        inside = (
            (moved[:, 0] > rx[0])
            & (moved[:, 0] <= rx[1])
            & (moved[:, 1] > ry[0])
            & (moved[:, 1] <= ry[1])
        )
        total += p * float(weights[inside].sum())
    return total


def mean_measure(
    config: TrafficConfig,
    region: Box | None = None,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> MeanMeasureResult:
    """mu_t(region): probability one particle is alive in the region at t.

    E N_t(region) = c * mu_t(region); thinning uses the normalized mass
    mu_t(region) / mu_t(E).  Kernels without an analytic transition law
    fall back to Monte Carlo with a reported standard error.
    """
    t = config.query_time
    if not config.motion.analytic:
        return _mean_measure_mc(config, region, mc_samples, seed)

    def positional(age: float) -> float:
        return _axis_positional_prob(config, age, region)

    if not config.birth_death:
        return MeanMeasureResult(positional(t), None, "analytic")

    window = config.arrivals
    rate = config.lifetime_rate
    hi = min(window.end, t)
    if hi < window.start:
        return MeanMeasureResult(0.0, None, "analytic")
    if window.width == 0.0:
        age = t - window.start
        surv = math.exp(-rate * age) if rate else 1.0
        return MeanMeasureResult(surv * positional(age), None, "analytic")
    nodes, weights = np.polynomial.legendre.leggauss(_GL_NODES)
    s = (nodes + 1.0) / 2.0 * (hi - window.start) + window.start
    w = weights * (hi - window.start) / 2.0 / window.width
    total = 0.0
    for si, wi in zip(s, w):
        age = t - si
        surv = math.exp(-rate * age) if rate else 1.0
        total += wi * surv * positional(age)
    return MeanMeasureResult(total, None, "analytic")


def _mean_measure_mc(config, region, mc_samples, seed) -> MeanMeasureResult:
    rng = streams.rng_for(seed, 971)
    t = config.query_time
    x0 = np.atleast_2d(config.nu.sample(rng, mc_samples))
    if config.birth_death:
        births = np.asarray(config.arrivals.sample(rng, mc_samples), dtype=float)
        alive = births <= t
        if config.lifetime_rate is not None:
            alive &= rng.exponential(1.0 / config.lifetime_rate, mc_samples) > (t - births)
        ages = t - births
    else:
        alive = np.ones(mc_samples, dtype=bool)
        ages = np.full(mc_samples, float(t))
    hits = np.zeros(mc_samples, dtype=bool)
    if alive.any():
        pos = config.motion.move(x0[alive], ages[alive], config.box, rng)
        target = region if region is not None else config.box
        hits[alive] = target.contains(pos)
    value = float(hits.mean())
    se = float(hits.std(ddof=1) / math.sqrt(mc_samples))
    return MeanMeasureResult(value, se, "mc")


@dataclass(frozen=True)
class CovarianceSignResult:
    covariance: float
    stderr: float
    verdict: str  # "zero", "negative", or "positive"
    analytic: float


def covariance_sign_experiment(
    config: TrafficConfig, region_a: Box, region_b: Box, n_rep: int, seed: int
) -> CovarianceSignResult:
    """Empirical covariance of (N_t(A), N_t(B)) and its sign verdict."""
    if region_a.intersects(region_b):
        raise DisjointnessError("regions must be disjoint")
    if n_rep < 10_000:
        raise ValueError("need at least 1e4 replicates for a sign verdict")
    counts = region_counts_bulk(config, [region_a, region_b], seed, n_rep)
    cov, se = stats.cov_stderr(counts[:, 0], counts[:, 1])
    if abs(cov) <= 4.0 * se:
        verdict = "zero"
    else:
        verdict = "negative" if cov < 0 else "positive"
    total = mean_measure(config).value
    a_bar = mean_measure(config, region_a).value / total
    b_bar = mean_measure(config, region_b).value / total
    c, delta2 = config.counting.moments()
    return CovarianceSignResult(cov, se, verdict, (delta2 - c) * a_bar * b_bar)


@dataclass(frozen=True)
class TrafficRestriction:
    thinned: CountingLaw
    mass: float  # normalized mu_t(A) / mu_t(E)
    mean_measure: MeanMeasureResult


def restrict_traffic(config: TrafficConfig, region: Box) -> TrafficRestriction:
    """Thinned counting law for the sub-system seen inside the region."""
    mm = mean_measure(config, region)
    total = mean_measure(config).value
    a = mm.value / total if total > 0 else 0.0
    if a <= 0.0:
        raise NullRestrictionError("region has zero mean mass at the query time")
    return TrafficRestriction(config.counting.thin(min(a, 1.0)), a, mm)
