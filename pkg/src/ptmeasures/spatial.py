"""Spatial laws and the events they measure.

One-dimensional laws expose exact masses, conditioning, sampling, and
quadrature over finite unions of half-open intervals (a, b].  Continuous
laws are represented by a node grid with a piecewise-linear CDF, so
``mass``, ``ppf``, and ``conditional`` describe exactly the same
distribution.  ``Discrete`` carries atoms (flagged atomic: the uniqueness
direction of the thinning theorem needs a diffuse law, so atomic laws are
reserved for the counterexample experiments).  ``ProductLaw`` combines
independent axis laws for box-shaped state spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NullRestrictionError

UNIFORM_QUAD_CELLS = 1024


@dataclass(frozen=True)
class IntervalUnion:
    """Finite disjoint union of half-open intervals (a, b], kept sorted."""

    bounds: tuple[tuple[float, float], ...]

    @classmethod
    def from_pairs(cls, *pairs) -> "IntervalUnion":
        cleaned = sorted((float(a), float(b)) for a, b in pairs)
        for a, b in cleaned:
            if not b > a:
                raise ValueError(f"empty or inverted interval ({a}, {b}]")
        merged: list[tuple[float, float]] = []
        for a, b in cleaned:
            if merged and a < merged[-1][1]:
                raise ValueError("intervals overlap")
            if merged and a == merged[-1][1]:
                merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        return cls(tuple(merged))

    def indicator(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.bounds:
            out |= (x > a) & (x <= b)
        return out

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.bounds)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion | None":
        pieces = []
        for a, b in self.bounds:
            for c, d in other.bounds:
                lo, hi = max(a, c), min(b, d)
                if hi > lo:
                    pieces.append((lo, hi))
        return IntervalUnion.from_pairs(*pieces) if pieces else None

    def intersects(self, other: "IntervalUnion") -> bool:
        return self.intersect(other) is not None

    def complement_within(self, lo: float, hi: float) -> "IntervalUnion | None":
        pieces = []
        cursor = lo
        for a, b in self.bounds:
            a, b = max(a, lo), min(b, hi)
            if b <= a:
                continue
            if a > cursor:
                pieces.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < hi:
            pieces.append((cursor, hi))
        return IntervalUnion.from_pairs(*pieces) if pieces else None


def as_interval_union(event) -> IntervalUnion:
    """Coerce an (a, b) pair or list of pairs into an IntervalUnion."""
    if isinstance(event, IntervalUnion):
        return event
    seq = list(event)
    if len(seq) == 2 and np.isscalar(seq[0]):
        return IntervalUnion.from_pairs(seq)
    return IntervalUnion.from_pairs(*seq)


class SpatialLaw:
    """Common surface for spatial laws; all operations are pure."""

    is_atomic: bool = False
    dimension: int = 1

    def mass(self, event) -> float:
        raise NotImplementedError

    def conditional(self, event) -> "SpatialLaw":
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError


class Law1D(SpatialLaw):
    """Continuous 1-D law defined by grid nodes and a piecewise-linear CDF."""

    _nodes: np.ndarray
    _cdf: np.ndarray
    _density: np.ndarray  # node densities, used only for quadrature weights

    def _init_grid(self, nodes: np.ndarray, cdf: np.ndarray, density: np.ndarray):
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_density", density)

    @property
    def support(self) -> tuple[float, float]:
        return float(self._nodes[0]), float(self._nodes[-1])

    @property
    def support_union(self) -> IntervalUnion:
        return IntervalUnion.from_pairs(self.support)

    def cdf(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self._nodes, self._cdf,
                         left=0.0, right=1.0)

    def mass(self, event) -> float:
        union = as_interval_union(event)
        total = 0.0
        for a, b in union.bounds:
            total += float(self.cdf(b) - self.cdf(a))
        return min(max(total, 0.0), 1.0)

    def ppf(self, u):
        return np.interp(np.asarray(u, dtype=float), self._cdf, self._nodes)

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))

    def conditional(self, event) -> "Law1D":
        union = as_interval_union(event)
        a_total = self.mass(union)
        if a_total <= 0.0:
            raise NullRestrictionError("conditioning event has zero mass")
        nodes_out: list[float] = []
        cdf_out: list[float] = []
        acc = 0.0
        for a, b in union.bounds:
            lo, hi = self.support
            a, b = max(a, lo), min(b, hi)
            if b <= a:
                continue
            inner = self._nodes[(self._nodes > a) & (self._nodes < b)]
            xs = np.concatenate(([a], inner, [b]))
            cs = self.cdf(xs)
            piece = (cs - cs[0]) + acc
            if nodes_out and xs[0] == nodes_out[-1]:
                nodes_out.extend(xs[1:].tolist())
                cdf_out.extend(piece[1:].tolist())
            else:
                nodes_out.extend(xs.tolist())
                cdf_out.extend(piece.tolist())
            acc = piece[-1]
        nodes = np.asarray(nodes_out)
        cdf = np.asarray(cdf_out) / acc
        cdf[-1] = 1.0
        return DensityTable._from_cdf(nodes, cdf)

    def quad_grid(self) -> np.ndarray:
        """Nodes used for quadrature of integrals against this law."""
        return self._nodes

    def integrate(self, f) -> float:
        """nu(f) by composite trapezoid against the node densities.

        ``f`` must accept a vector of locations.
        """
        xs = self.quad_grid()
        vals = np.asarray(f(xs), dtype=float)
        dens = np.interp(xs, self._nodes, self._density)
        return float(np.trapezoid(vals * dens, xs))


@dataclass(frozen=True)
class UniformInterval(Law1D):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("interval must have positive length")
        nodes = np.array([self.lo, self.hi], dtype=float)
        dens = np.full(2, 1.0 / (self.hi - self.lo))
        self._init_grid(nodes, np.array([0.0, 1.0]), dens)

    def quad_grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, UNIFORM_QUAD_CELLS + 1)

    def conditional(self, event) -> Law1D:
        union = as_interval_union(event)
        if len(union.bounds) == 1:
            a, b = union.bounds[0]
            a, b = max(a, self.lo), min(b, self.hi)
            if b <= a:
                raise NullRestrictionError("conditioning event has zero mass")
            return UniformInterval(a, b)
        return super().conditional(event)


@dataclass(frozen=True)
class DensityTable(Law1D):
    """Tabulated density on an increasing grid, normalized by trapezoid rule.

    Sampling inverts the tabulated cumulative with linear interpolation
    between grid points, so interval masses and sampling agree exactly.
    """

    grid: tuple[float, ...]
    density: tuple[float, ...]

    def __post_init__(self):
        nodes = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 nodes")
        if dens.shape != nodes.shape or np.any(dens < 0):
            raise ValueError("density must be non-negative and match the grid")
        cell = np.diff(nodes) * (dens[:-1] + dens[1:]) / 2.0
        total = cell.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"density integrates to {total}, not 1 within 1e-10")
        cdf = np.concatenate(([0.0], np.cumsum(cell / total)))
        cdf[-1] = 1.0
        self._init_grid(nodes, cdf, dens / total)

    @classmethod
    def normalized(cls, grid, density) -> "DensityTable":
        """Build a table from unnormalized non-negative values."""
        grid = np.asarray(grid, dtype=float)
        density = np.asarray(density, dtype=float)
        total = np.trapezoid(density, grid)
        if total <= 0:
            raise ValueError("cannot normalize a zero density")
        return cls(tuple(grid), tuple(density / total))

    @classmethod
    def _from_cdf(cls, nodes: np.ndarray, cdf: np.ndarray) -> "DensityTable":
        obj = object.__new__(cls)
        slopes = np.diff(cdf) / np.diff(nodes)
        dens = np.empty_like(nodes)
        dens[0], dens[-1] = slopes[0], slopes[-1]
        dens[1:-1] = (slopes[:-1] + slopes[1:]) / 2.0
        object.__setattr__(obj, "grid", tuple(nodes))
        object.__setattr__(obj, "density", tuple(dens))
        obj._init_grid(nodes, cdf, dens)
        return obj


@dataclass(frozen=True)
class Discrete(SpatialLaw):
    """Atomic law on a finite set of points (1-D numeric or arbitrary)."""

    atoms: tuple
    probs: tuple[float, ...]

    is_atomic = True

    def __post_init__(self):
        if len(self.atoms) != len(self.probs) or not self.atoms:
            raise ValueError("atoms and probs must be non-empty and aligned")
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be non-negative and sum to 1")

    @property
    def _cum(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def _mask(self, event) -> np.ndarray:
        if isinstance(event, (set, frozenset)):
            return np.array([a in event for a in self.atoms])
        union = as_interval_union(event)
        return union.indicator(np.asarray(self.atoms, dtype=float))

    def mass(self, event) -> float:
        return float(np.asarray(self.probs)[self._mask(event)].sum())

    def conditional(self, event) -> "Discrete":
        mask = self._mask(event)
        total = float(np.asarray(self.probs)[mask].sum())
        if total <= 0:
            raise NullRestrictionError("conditioning event has zero mass")
        atoms = tuple(a for a, m in zip(self.atoms, mask) if m)
        probs = tuple(p / total for p, m in zip(self.probs, mask) if m)
        return Discrete(atoms, probs)

    def ppf(self, u):
        scalar = np.ndim(u) == 0
        idx = np.searchsorted(self._cum, np.atleast_1d(u), side="left")
        atoms = np.asarray(self.atoms, dtype=object)
        out = atoms[idx]
        try:
            out = out.astype(float)
        except (TypeError, ValueError):
            pass
        return out[0] if scalar else out

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.ppf(u)

    def integrate(self, f) -> float:
        return float(sum(p * f(a) for a, p in zip(self.atoms, self.probs)))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in up to three dimensions."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not 1 <= len(self.lo) <= 3:
            raise ValueError("box needs matching lo/hi in 1..3 dimensions")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box must have positive extent on every axis")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts > lo) & (pts <= hi), axis=1)

    def intersects(self, other: "Box") -> bool:
        return all(
            min(h1, h2) > max(l1, l2)
            for l1, h1, l2, h2 in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def axis_interval(self, axis: int) -> tuple[float, float]:
        return self.lo[axis], self.hi[axis]


@dataclass(frozen=True)
class ProductLaw(SpatialLaw):
    """Independent product of 1-D laws over the axes of a box."""

    axes: tuple[Law1D, ...]

    def __post_init__(self):
        if not self.axes:
            raise ValueError("need at least one axis law")

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @classmethod
    def uniform_on(cls, box: Box) -> "ProductLaw":
        return cls(tuple(UniformInterval(l, h) for l, h in zip(box.lo, box.hi)))

    def mass(self, event) -> float:
        box = event
        if not isinstance(box, Box):
            raise TypeError("product-law events are boxes")
        m = 1.0
        for axis, law in enumerate(self.axes):
            m *= law.mass(IntervalUnion.from_pairs(box.axis_interval(axis)))
        return m

    def conditional(self, event) -> "ProductLaw":
        box = event
        if not isinstance(box, Box):
            raise TypeError("product-law events are boxes")
        return ProductLaw(
            tuple(
                law.conditional(IntervalUnion.from_pairs(box.axis_interval(axis)))
                for axis, law in enumerate(self.axes)
            )
        )

    def ppf(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != len(self.axes):
            raise ValueError("uniform matrix must have one column per axis")
        cols = [law.ppf(u[:, j]) for j, law in enumerate(self.axes)]
        return np.column_stack(cols)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        pts = self.ppf(rng.random((n, len(self.axes))))
        return pts[0] if size is None else pts
