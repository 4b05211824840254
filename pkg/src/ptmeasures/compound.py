"""Compound totals over a marked arrival measure.

Customers arrive over an n-day horizon as a Poisson or negative binomial
random measure; each carries a categorical state drawn from
time-dependent probabilities and a spend amount with state-dependent
mean and variance.  Totals Z_B over observed day sets B have closed-form
means, variances, and cross-covariances; the dispersion gap
``variance - mean`` of the counting law controls whether observed and
unobserved totals are independent (Poisson) or positively coupled
(negative binomial).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _stats
from scipy.special import roots_genlaguerre

from . import stats
from .counting import CountingLaw, NegativeBinomial, Poisson
from .errors import UnsupportedFamilyError
from .spatial import IntervalUnion, SpatialLaw, UniformInterval, as_interval_union
from .stc import MarkKernel, MeasureSpec, _bulk_points


@dataclass(frozen=True)
class PiecewiseStateProbs:
    """State probabilities constant on day segments of the horizon."""

    breaks: tuple[float, ...]          # segment right endpoints, increasing
    probs: tuple[tuple[float, ...], ...]  # one probability row per segment

    def __post_init__(self):
        if len(self.breaks) != len(self.probs) or not self.breaks:
            raise ValueError("need one probability row per segment")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must increase")
        for row in self.probs:
            if abs(sum(row) - 1.0) > 1e-12 or any(p < 0 for p in row):
                raise ValueError("each row must be a probability vector")
            if len(row) != len(self.probs[0]):
                raise ValueError("rows must have equal length")

    @classmethod
    def constant(cls, probs: Sequence[float], horizon: float) -> "PiecewiseStateProbs":
        return cls((float(horizon),), (tuple(float(p) for p in probs),))

    @property
    def n_states(self) -> int:
        return len(self.probs[0])

    def segment_index(self, t) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks), np.asarray(t, dtype=float), side="left")
        return np.minimum(idx, len(self.breaks) - 1)

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.probs[int(self.segment_index(t))])

    def segments(self, horizon: float) -> list[tuple[IntervalUnion, np.ndarray]]:
        out = []
        lo = 0.0
        for hi, row in zip(self.breaks, self.probs):
            hi = min(hi, horizon)
            if hi > lo:
                out.append((IntervalUnion.from_pairs((lo, hi)), np.asarray(row)))
            lo = hi
        return out


def _gamma_spender(mean: float, var: float) -> Callable:
    """Per-state spend quantile map matching (mean, var); gamma family."""
    if var == 0.0:
        return lambda u: np.full(np.shape(u), mean)
    shape = mean * mean / var
    scale = var / mean
    return lambda u: _stats.gamma.ppf(u, shape) * scale


@dataclass(frozen=True)
class StoreModel:
    """Arrival measure plus state and spend kernels for one store."""

    counting: CountingLaw
    horizon: float
    state_probs: PiecewiseStateProbs
    spend_mean: tuple[float, ...]
    spend_var: tuple[float, ...]
    arrival_law: SpatialLaw | None = None

    def __post_init__(self):
        if not isinstance(self.counting, (Poisson, NegativeBinomial)):
            raise UnsupportedFamilyError(
                "compound model needs Poisson or NegativeBinomial arrivals"
            )
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        s = self.state_probs.n_states
        if len(self.spend_mean) != s or len(self.spend_var) != s:
            raise ValueError("spend moments must align with the state count")
        if any(v < 0 for v in self.spend_var):
            raise ValueError("spend variances must be non-negative")
        if any(m <= 0 for m in self.spend_mean):
            raise ValueError("spend means must be positive")

    @property
    def arrivals(self) -> SpatialLaw:
        return self.arrival_law or UniformInterval(0.0, self.horizon)

    @property
    def n_states(self) -> int:
        return self.state_probs.n_states

    def full_horizon(self) -> IntervalUnion:
        return IntervalUnion.from_pairs((0.0, self.horizon))

    def complement(self, event) -> IntervalUnion | None:
        return as_interval_union(event).complement_within(0.0, self.horizon)


def _state_integrals(model: StoreModel, event) -> tuple[float, float]:
    """(nu(1_B sum p alpha), nu(1_B sum p (alpha^2 + beta^2)))."""
    union = as_interval_union(event)
    alpha = np.asarray(model.spend_mean)
    second = alpha**2 + np.asarray(model.spend_var)
    m1 = 0.0
    m2 = 0.0
    for segment, row in model.state_probs.segments(model.horizon):
        piece = segment.intersect(union)
        if piece is None:
            continue
        w = model.arrivals.mass(piece)
        m1 += w * float(row @ alpha)
        m2 += w * float(row @ second)
    return m1, m2


def z_moments(model: StoreModel, event) -> tuple[float, float]:
    """Mean and variance of the total spend over the day set B."""
    c, delta2 = model.counting.moments()
    m1, m2 = _state_integrals(model, event)
    return (c * m1, c * m2 + (delta2 - c) * m1**2)


def z_covariance(model: StoreModel, a_event) -> float:
    """Cov of totals over A and its complement: (var-c) m1(A) m1(A^c)."""
    c, delta2 = model.counting.moments()
    m1_a, _ = _state_integrals(model, a_event)
    comp = model.complement(a_event)
    m1_c = 0.0 if comp is None else _state_integrals(model, comp)[0]
    return (delta2 - c) * m1_a * m1_c


def decompose_total(model: StoreModel, a_event) -> tuple[float, float, float]:
    """(E Z, E Z_A, E Z_{A^c}); additivity holds by construction."""
    ez_a = z_moments(model, a_event)[0]
    comp = model.complement(a_event)
    ez_c = 0.0 if comp is None else z_moments(model, comp)[0]
    return (ez_a + ez_c, ez_a, ez_c)


def state_kernel(model: StoreModel) -> MarkKernel:
    """Categorical state mark drawn from the time-dependent probabilities."""
    sp = model.state_probs
    cum = np.cumsum(np.asarray(sp.probs), axis=1)

    def sampler(point, rng):
        return int(np.searchsorted(cum[int(sp.segment_index(point[0]))], rng.random()))

    def mean_integrator(point, fn):
        row = sp(point[0])
        return float(sum(p * fn(x) for x, p in enumerate(row)))

    def bulk_sampler(columns, u):
        seg = sp.segment_index(columns[0])
        return (u[:, :1] > cum[seg]).sum(axis=1)

    return MarkKernel(
        sampler, mean_integrator=mean_integrator, bulk_sampler=bulk_sampler, label="state"
    )


def spend_kernel(model: StoreModel, n_quad: int = 64) -> MarkKernel:
    """Spend amount mark: per-state gamma matched to (mean, variance)."""
    spenders = [
        _gamma_spender(m, v) for m, v in zip(model.spend_mean, model.spend_var)
    ]
    quads = []
    for m, v in zip(model.spend_mean, model.spend_var):
        if v == 0.0:
            quads.append((np.array([m]), np.array([1.0])))
        else:
            shape, scale = m * m / v, v / m
            z, w = roots_genlaguerre(n_quad, shape - 1.0)
            quads.append((z * scale, w / math.gamma(shape)))

    def sampler(point, rng):
        return float(spenders[int(point[-1])](rng.random()))

    def mean_integrator(point, fn):
        znodes, weights = quads[int(point[-1])]
        return float(sum(w * fn(z) for z, w in zip(znodes, weights)))

    def bulk_sampler(columns, u):
        states = np.asarray(columns[-1], dtype=np.int64)
        out = np.empty(states.size, dtype=float)
        for x, spender in enumerate(spenders):
            mask = states == x
            if mask.any():
                out[mask] = spender(u[mask, 0])
        return out

    return MarkKernel(
        sampler, mean_integrator=mean_integrator, bulk_sampler=bulk_sampler, label="spend"
    )


def as_measure_spec(model: StoreModel) -> MeasureSpec:
    """The marked measure (counting, nu x Q x Q2) behind the store model."""
    return MeasureSpec(
        model.counting, model.arrivals, (state_kernel(model), spend_kernel(model))
    )


@dataclass(frozen=True)
class StoreSimulation:
    """Empirical spend moments with standard errors."""

    n_rep: int
    mean_z: tuple[float, float]
    mean_za: tuple[float, float]
    mean_zc: tuple[float, float]
    var_z: tuple[float, float]
    var_za: tuple[float, float]
    var_zc: tuple[float, float]
    cov: tuple[float, float]


def store_totals_bulk(
    model: StoreModel, a_event, seed: int, n_rep: int, rep_lo: int = 0
) -> np.ndarray:
    """(n_rep, 2) matrix of (Z, Z_A) totals for seeded replicates."""
    spec = as_measure_spec(model)
    counts, rep_ids, columns = _bulk_points(spec, seed, n_rep, rep_lo)
    ts, _, spend = columns
    union = as_interval_union(a_event)
    in_a = union.indicator(ts)
    rel = rep_ids - rep_lo
    z = np.bincount(rel, weights=spend, minlength=n_rep)
    z_a = np.bincount(rel[in_a], weights=spend[in_a], minlength=n_rep)
    return np.column_stack([z, z_a])


def simulate_store(
    model: StoreModel, a_event, n_rep: int, seed: int
) -> StoreSimulation:
    """Replicated totals (Z, Z_A, Z_{A^c}) via the marked construction."""
    if n_rep < 1:
        raise ValueError("n_rep must be positive")
    totals = store_totals_bulk(model, a_event, seed, n_rep)
    z, z_a = totals[:, 0], totals[:, 1]
    z_c = z - z_a
    return StoreSimulation(
        n_rep,
        stats.mean_stderr(z),
        stats.mean_stderr(z_a),
        stats.mean_stderr(z_c),
        stats.var_stderr(z),
        stats.var_stderr(z_a),
        stats.var_stderr(z_c),
        stats.cov_stderr(z_a, z_c),
    )
