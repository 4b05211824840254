"""Spatial laws: masses, conditioning, sampling, quadrature."""

import numpy as np
import pytest

from ptmeasures.errors import NullRestrictionError
from ptmeasures.spatial import (
    Box,
    DensityTable,
    Discrete,
    IntervalUnion,
    ProductLaw,
    UniformInterval,
    as_interval_union,
)


class TestIntervalUnion:
    def test_merges_adjacent(self):
        u = IntervalUnion.from_pairs((0.0, 0.5), (0.5, 1.0))
        assert u.bounds == ((0.0, 1.0),)

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            IntervalUnion.from_pairs((0.0, 0.6), (0.5, 1.0))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            IntervalUnion.from_pairs((0.3, 0.3))

    def test_half_open_indicator(self):
        u = IntervalUnion.from_pairs((0.0, 0.5))
        np.testing.assert_array_equal(
            u.indicator([0.0, 0.25, 0.5, 0.75]), [False, True, True, False]
        )

    def test_complement(self):
        u = IntervalUnion.from_pairs((0.2, 0.4), (0.6, 0.8))
        comp = u.complement_within(0.0, 1.0)
        assert comp.bounds == ((0.0, 0.2), (0.4, 0.6), (0.8, 1.0))
        assert u.length + comp.length == pytest.approx(1.0)

    def test_intersect(self):
        a = IntervalUnion.from_pairs((0.0, 0.5))
        b = IntervalUnion.from_pairs((0.4, 1.0))
        assert a.intersect(b).bounds == ((0.4, 0.5),)
        assert a.intersect(IntervalUnion.from_pairs((0.5, 1.0))) is None

    def test_coercion(self):
        assert as_interval_union((0.0, 1.0)).bounds == ((0.0, 1.0),)
        assert as_interval_union([(0.0, 0.2), (0.5, 0.6)]).bounds == ((0.0, 0.2), (0.5, 0.6))


class TestUniformInterval:
    def test_mass(self):
        law = UniformInterval(0.0, 2.0)
        assert law.mass(((0.5, 1.5),)) == pytest.approx(0.5, abs=1e-15)

    def test_conditional_single(self):
        law = UniformInterval(0.0, 1.0).conditional(((0.0, 0.5),))
        assert isinstance(law, UniformInterval)
        assert (law.lo, law.hi) == (0.0, 0.5)

    def test_conditional_union_masses(self):
        union = IntervalUnion.from_pairs((0.0, 0.2), (0.6, 1.0))
        cond = UniformInterval(0.0, 1.0).conditional(union)
        assert cond.mass(((0.0, 0.2),)) == pytest.approx(0.2 / 0.6, abs=1e-12)
        assert cond.mass(((0.2, 0.6),)) == pytest.approx(0.0, abs=1e-12)

    def test_null_conditional_rejected(self):
        with pytest.raises(NullRestrictionError):
            UniformInterval(0.0, 1.0).conditional(((2.0, 3.0),))

    def test_integrate_linear_exact(self):
        law = UniformInterval(0.0, 2.0)
        assert law.integrate(lambda x: x) == pytest.approx(1.0, abs=1e-12)

    def test_ppf_round_trip(self):
        law = UniformInterval(1.0, 3.0)
        u = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(law.cdf(law.ppf(u)), u, atol=1e-14)


class TestDensityTable:
    def test_normalization_enforced(self):
        grid = np.linspace(0.0, 1.0, 11)
        with pytest.raises(ValueError):
            DensityTable(tuple(grid), tuple(np.full(11, 2.0)))

    def test_normalized_constructor(self):
        grid = np.linspace(0.0, 2.0, 201)
        law = DensityTable.normalized(grid, np.exp(-grid))
        assert law.mass(((0.0, 2.0),)) == pytest.approx(1.0, abs=1e-12)

    def test_mass_matches_sampled_frequencies(self):
        grid = np.linspace(0.0, 1.0, 101)
        law = DensityTable.normalized(grid, 1.0 + grid)
        rng = np.random.default_rng(5)
        xs = law.sample(rng, 200_000)
        for event in [((0.0, 0.3),), ((0.3, 0.7),), ((0.55, 1.0),)]:
            m = law.mass(event)
            freq = as_interval_union(event).indicator(xs).mean()
            assert freq == pytest.approx(m, abs=4.5 * np.sqrt(m * (1 - m) / xs.size))

    def test_conditional_consistency(self):
        grid = np.linspace(0.0, 1.0, 101)
        law = DensityTable.normalized(grid, 1.0 + grid)
        event = ((0.25, 0.75),)
        cond = law.conditional(event)
        inner = ((0.25, 0.5),)
        assert cond.mass(inner) == pytest.approx(law.mass(inner) / law.mass(event), rel=1e-10)

    def test_integrate_against_quadrature(self):
        grid = np.linspace(0.0, 1.0, 2001)
        law = DensityTable.normalized(grid, 2.0 - grid)
        from scipy.integrate import quad

        dens = lambda x: (2.0 - x) / 1.5
        oracle, _ = quad(lambda x: np.sin(x) * dens(x), 0.0, 1.0)
        assert law.integrate(np.sin) == pytest.approx(oracle, rel=1e-6)


class TestDiscrete:
    def test_mass_by_set_and_interval(self):
        law = Discrete((0.0, 1.0, 2.0), (0.2, 0.3, 0.5))
        assert law.mass({1.0}) == pytest.approx(0.3)
        assert law.mass(((0.5, 2.0),)) == pytest.approx(0.8)
        assert law.is_atomic

    def test_conditional(self):
        law = Discrete((0.0, 1.0, 2.0), (0.2, 0.3, 0.5)).conditional({1.0, 2.0})
        assert law.atoms == (1.0, 2.0)
        assert law.probs == pytest.approx((0.375, 0.625))

    def test_symbolic_atoms(self):
        law = Discrete(("diamond", "square"), (0.5, 0.5))
        assert law.mass({"diamond"}) == 0.5
        rng = np.random.default_rng(0)
        draws = [law.sample(rng) for _ in range(20)]
        assert set(np.asarray(draws).tolist()) <= {"diamond", "square"}

    def test_sampler_frequencies(self):
        law = Discrete((0.0, 1.0, 2.0), (0.2, 0.3, 0.5))
        rng = np.random.default_rng(1)
        draws = np.asarray(law.sample(rng, 100_000), dtype=float)
        for atom, p in zip(law.atoms, law.probs):
            freq = (draws == atom).mean()
            assert freq == pytest.approx(p, abs=4.5 * np.sqrt(p * (1 - p) / draws.size))


class TestBoxAndProduct:
    def test_box_basics(self):
        box = Box((0.0, 0.0), (2.0, 4.0))
        assert box.volume == 8.0
        assert box.contains(np.array([[1.0, 1.0], [3.0, 1.0]])).tolist() == [True, False]
        assert not box.intersects(Box((2.0, 0.0), (3.0, 4.0)))

    def test_product_mass_and_conditional(self):
        law = ProductLaw.uniform_on(Box((0.0, 0.0), (2.0, 2.0)))
        sub = Box((0.0, 0.0), (1.0, 1.0))
        assert law.mass(sub) == pytest.approx(0.25, abs=1e-15)
        cond = law.conditional(sub)
        assert cond.mass(Box((0.0, 0.0), (0.5, 1.0))) == pytest.approx(0.5, abs=1e-13)

    def test_product_sampling_in_box(self):
        box = Box((0.0, 1.0, 2.0), (1.0, 2.0, 3.0))
        law = ProductLaw.uniform_on(box)
        rng = np.random.default_rng(2)
        pts = law.sample(rng, 1000)
        assert box.contains(pts).all()
