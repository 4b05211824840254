"""Stone-throwing construction of random counting measures.

A measure spec ``N = (counting, spatial)`` realizes point patterns by
drawing a count K and then K iid locations; optional mark kernels extend
each point to a tuple over the product space.  Analytic expectations
(first two moments of Nf, pairwise covariances, Laplace functionals) are
computed from the counting law's pgf and quadrature against the spatial
law, for cross-checking against Monte Carlo.

Two sampling surfaces exist: per-pattern sampling from a caller-owned
``numpy.random.Generator``, and bulk replicated sampling indexed by a
seed through :mod:`ptmeasures.streams` (replicate i sees the same draws
no matter how many replicates run or on how many threads).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from . import streams
from .counting import CountingLaw
from .errors import (
    AnalyticUnavailableError,
    DisjointnessError,
    NullRestrictionError,
    PartitionError,
)
from .spatial import IntervalUnion, SpatialLaw, as_interval_union


class _Cemetery:
    """Absorbing sentinel for marks of destroyed points."""

    def __repr__(self) -> str:
        return "CEMETERY"


CEMETERY = _Cemetery()

# stream roles for bulk sampling
_R_COUNT = 0
_R_LOC = 1
_R_MARK = 2  # kernel i uses role _R_MARK + i


@dataclass(frozen=True)
class MarkKernel:
    """Transition kernel attaching a random mark to each point.

    ``sampler(point, rng)`` draws one mark given the tuple of location and
    earlier marks.  ``mean_integrator(point, fn)`` returns E[fn(Y) | point]
    and enables analytic expectations; without it, marked specs support
    Monte Carlo only.  ``defective_mass(point)`` is the probability of the
    cemetery; proper kernels leave it at None.  ``bulk_sampler(points, u)``
    optionally maps arrays of points plus uniforms of shape
    (n, n_uniforms) to an array of marks for vectorized replication.
    """

    sampler: Callable
    mean_integrator: Callable | None = None
    defective_mass: Callable | None = None
    bulk_sampler: Callable | None = None
    n_uniforms: int = 1
    label: str = ""

    def integrate(self, point, fn) -> float:
        if self.mean_integrator is None:
            raise AnalyticUnavailableError(
                f"mark kernel {self.label or '<anonymous>'} has no mean_integrator"
            )
        return self.mean_integrator(point, fn)


@dataclass(frozen=True)
class MeasureSpec:
    """A random measure N = (counting, spatial) with optional mark kernels."""

    counting: CountingLaw
    spatial: SpatialLaw
    marks: tuple[MarkKernel, ...] = ()

    def mark(self, kernel: MarkKernel) -> "MeasureSpec":
        """Append a mark kernel over the current product space."""
        return replace(self, marks=self.marks + (kernel,))

    def restrict(self, event) -> "MeasureSpec":
        return restrict(self, event)


@dataclass(frozen=True)
class PointPattern:
    """One realized outcome: an exchangeable list of points or mark tuples."""

    points: tuple

    @property
    def count(self) -> int:
        return len(self.points)

    def locations(self) -> np.ndarray:
        if not self.points:
            return np.empty(0)
        first = self.points[0]
        if isinstance(first, tuple):
            return np.asarray([p[0] for p in self.points], dtype=float)
        return np.asarray(self.points, dtype=float)


def sample_pattern(spec: MeasureSpec, rng: np.random.Generator) -> PointPattern:
    """Draw K from the counting law, then K iid locations, then marks."""
    k = int(spec.counting.sample(rng))
    if k == 0:
        return PointPattern(())
    xs = np.atleast_1d(spec.spatial.sample(rng, k))
    if not spec.marks:
        if getattr(spec.spatial, "dimension", 1) > 1:
            return PointPattern(tuple(map(tuple, xs)))
        return PointPattern(tuple(xs.tolist()))
    pts = []
    for x in xs:
        tup = (x.item(),) if isinstance(x, np.generic) else ((x,) if np.ndim(x) == 0 else tuple(x))
        for kernel in spec.marks:
            if any(v is CEMETERY for v in tup):
                tup = tup + (CEMETERY,)
                continue
            tup = tup + (kernel.sampler(tup, rng),)
        pts.append(tup)
    return PointPattern(tuple(pts))


def integrate(pattern: PointPattern, f, strict: bool = False) -> float:
    """Nf = sum of f over the pattern; empty patterns give 0.

    Tuples containing the cemetery are skipped unless ``strict``.
    """
    total = 0.0
    for p in pattern.points:
        if isinstance(p, tuple):
            if any(v is CEMETERY for v in p):
                if strict:
                    raise ValueError("cemetery mark in strict integration")
                continue
            total += float(f(*p))
        else:
            total += float(f(p))
    return total


def restrict(spec: MeasureSpec, event) -> MeasureSpec:
    """Restriction N_A = (thinned counting, conditional spatial, same marks)."""
    a = spec.spatial.mass(event)
    if a <= 0.0:
        raise NullRestrictionError(
            "restriction to a null set is degenerate; no thinning map at a=0"
        )
    thinned = spec.counting.thin(min(a, 1.0))
    return MeasureSpec(thinned, spec.spatial.conditional(event), spec.marks)


def _mark_mean(spec: MeasureSpec, x: float, fn) -> float:
    """E[fn(x, Y_1, .., Y_m)] over the mark kernels, innermost last."""

    def descend(prefix: tuple, depth: int) -> float:
        if depth == len(spec.marks):
            return fn(*prefix)
        kernel = spec.marks[depth]
        return kernel.integrate(prefix, lambda y: descend(prefix + (y,), depth + 1))

    return descend((x,), 0)


def _nu_mean(spec: MeasureSpec, f) -> float:
    """nu(f) over the (possibly marked) product law."""
    if not spec.marks:
        return spec.spatial.integrate(f)

    def averaged(xs):
        arr = np.atleast_1d(np.asarray(xs, dtype=float))
        vals = np.array([_mark_mean(spec, float(x), f) for x in arr])
        return vals if np.ndim(xs) else float(vals[0])

    return spec.spatial.integrate(averaged)


def laplace_analytic(spec: MeasureSpec, f) -> float:
    """E exp(-Nf) = pgf(nu e^{-f}), marks folded in through their kernels.

    ``f`` is a vectorized test function; a non-callable ``f`` is taken as
    an event whose indicator mass is computed exactly.
    """
    if not callable(f):
        a = spec.spatial.mass(f)
        inner = (1.0 - a) + a * math.exp(-1.0)
    else:
        inner = _nu_mean(spec, lambda *args: np.exp(-np.asarray(f(*args), dtype=float)))
    inner = min(max(float(inner), 0.0), 1.0)
    return float(spec.counting.pgf(inner))


def moments_analytic(spec: MeasureSpec, f) -> tuple[float, float]:
    """Mean and variance of Nf: (c nu f, c nu f^2 + (var-c)(nu f)^2).

    As in :func:`laplace_analytic`, a non-callable ``f`` denotes an event
    and nu(f) = nu(f^2) is its exact mass.
    """
    c, delta2 = spec.counting.moments()
    if not callable(f):
        nu_f = nu_f2 = spec.spatial.mass(f)
    else:
        nu_f = _nu_mean(spec, f)
        nu_f2 = _nu_mean(spec, lambda *args: np.asarray(f(*args), dtype=float) ** 2)
    return (c * nu_f, c * nu_f2 + (delta2 - c) * nu_f**2)


def pair_covariance_analytic(spec: MeasureSpec, a_event, b_event) -> float:
    """Cov(N(A), N(B)) = (var - c) nu(A) nu(B) for disjoint A, B."""
    a_union = as_interval_union(a_event)
    b_union = as_interval_union(b_event)
    if a_union.intersects(b_union):
        raise DisjointnessError("covariance formula needs disjoint sets")
    c, delta2 = spec.counting.moments()
    return (delta2 - c) * spec.spatial.mass(a_union) * spec.spatial.mass(b_union)


def partition_counts(pattern: PointPattern, partition: Sequence) -> list[int]:
    """Counts of pattern locations per cell of a disjoint covering partition."""
    cells = [as_interval_union(cell) for cell in partition]
    for i, ci in enumerate(cells):
        for cj in cells[i + 1 :]:
            if ci.intersects(cj):
                raise PartitionError("partition cells overlap")
    xs = pattern.locations()
    counts = [int(cell.indicator(xs).sum()) for cell in cells]
    if sum(counts) != pattern.count:
        raise PartitionError("partition does not cover every point")
    return counts


def joint_pmf(law: CountingLaw, masses: Sequence[float], counts: Sequence[int]) -> float:
    """P(N(A)=i, ..., N(B)=j) = k!/(i! ... j!) nu(A)^i ... nu(B)^j P(K=k)."""
    masses = np.asarray(masses, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    if masses.shape != counts.shape:
        raise ValueError("masses and counts must align")
    if np.any(counts < 0) or np.any(masses < 0):
        raise ValueError("masses and counts must be non-negative")
    if masses.sum() > 1.0 + 1e-9:
        raise ValueError("masses exceed total mass 1")
    k = int(counts.sum())
    log_coeff = gammaln(k + 1) - gammaln(counts + 1).sum()
    with np.errstate(divide="ignore"):
        log_mass = np.where(counts > 0, counts * np.log(np.maximum(masses, 1e-300)), 0.0)
    return float(np.exp(log_coeff + log_mass.sum()) * law.pmf(k))


def laplace_mc(
    spec: MeasureSpec, f, n_rep: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of E exp(-Nf)."""
    if n_rep < 100:
        raise ValueError("need at least 100 replicates")
    vals = np.empty(n_rep)
    for i in range(n_rep):
        vals[i] = math.exp(-integrate(sample_pattern(spec, rng), f))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_rep))


# ---------------------------------------------------------------------------
# bulk replicated sampling, indexed by (seed, replicate, role, item)


def _bulk_points(spec: MeasureSpec, seed: int, n_rep: int, rep_lo: int = 0):
    """Counts, replicate ids, locations, and marks for replicates
    [rep_lo, rep_lo + n_rep); draws depend only on absolute replicate ids."""
    reps = np.arange(rep_lo, rep_lo + n_rep, dtype=np.int64)
    counts = spec.counting.ppf(streams.uniforms(seed, reps, _R_COUNT, 0))
    total = int(counts.sum())
    rep_ids = np.repeat(reps, counts)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    within = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts)
    if getattr(spec.spatial, "dimension", 1) != 1:
        raise ValueError("bulk sampling supports 1-D spatial laws")
    xs = np.asarray(spec.spatial.ppf(streams.uniforms(seed, rep_ids, _R_LOC, within)))
    columns = [xs]
    for i, kernel in enumerate(spec.marks):
        if kernel.bulk_sampler is None:
            raise AnalyticUnavailableError(
                f"mark kernel {kernel.label or i} lacks a bulk_sampler"
            )
        u = np.stack(
            [
                streams.uniforms(seed, rep_ids, _R_MARK + i, within, j)
                for j in range(kernel.n_uniforms)
            ],
            axis=-1,
        )
        columns.append(np.asarray(kernel.bulk_sampler(tuple(columns), u)))
    return counts, rep_ids, columns


def sample_counts_bulk(
    spec: MeasureSpec, events: Sequence, seed: int, n_rep: int, rep_lo: int = 0
) -> np.ndarray:
    """(n_rep, len(events)) matrix of N(A) counts over seeded replicates."""
    counts, rep_ids, columns = _bulk_points(spec, seed, n_rep, rep_lo)
    xs = columns[0]
    rel = rep_ids - rep_lo
    out = np.empty((n_rep, len(events)), dtype=np.int64)
    for j, event in enumerate(events):
        mask = as_interval_union(event).indicator(xs)
        out[:, j] = np.bincount(rel[mask], minlength=n_rep)
    return out


def integrate_bulk(
    spec: MeasureSpec, f, seed: int, n_rep: int, rep_lo: int = 0
) -> np.ndarray:
    """Vector of Nf values over seeded replicates; f is vectorized."""
    counts, rep_ids, columns = _bulk_points(spec, seed, n_rep, rep_lo)
    weights = np.asarray(f(*columns), dtype=float)
    return np.bincount(rep_ids - rep_lo, weights=weights, minlength=n_rep)


def laplace_mc_bulk(spec: MeasureSpec, f, seed: int, n_rep: int) -> tuple[float, float]:
    """Bulk Monte Carlo estimate and stderr of E exp(-Nf)."""
    if n_rep < 100:
        raise ValueError("need at least 100 replicates")
    vals = np.exp(-integrate_bulk(spec, f, seed, n_rep))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_rep))
