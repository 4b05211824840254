"""Closure-identity residuals, NNPS classification, and the atomic example."""

import math

import numpy as np
import pytest

from ptmeasures import bone, stats, stc
from ptmeasures.bone import BoneClass
from ptmeasures.counting import (
    Binomial,
    Deterministic,
    NegativeBinomial,
    NnpsFamily,
    Poisson,
)
from ptmeasures.errors import HypothesisViolationError
from ptmeasures.spatial import Discrete


PT_GRID = {
    "poisson": [Poisson(th) for th in (0.25, 0.8, 2.0, 3.5, 6.0)],
    "binomial": [Binomial(n, p) for n, p in ((1, 0.5), (3, 0.2), (5, 0.7), (10, 0.4), (20, 0.9))],
    "negative_binomial": [
        NegativeBinomial(r, th)
        for r, th in ((0.5, 0.3), (1.0, 0.5), (2.0, 0.7), (3.0, 0.4), (7.5, 0.2))
    ],
}


class TestPtResiduals:
    @pytest.mark.parametrize("law", [l for laws in PT_GRID.values() for l in laws])
    @pytest.mark.parametrize("a", [0.1, 0.5, 0.9])
    def test_grid_residuals(self, law, a):
        assert bone.bone_residual(law, a) < 1e-12

    def test_examples(self):
        assert bone.bone_residual(Poisson(2.0), 0.5) < 1e-12
        assert bone.bone_residual(NegativeBinomial(3.0, 0.4), 0.25) < 1e-12

    def test_identity_at_one(self):
        assert bone.bone_residual(Poisson(2.0), 1.0) == 0.0


class TestNnpsVerdicts:
    def test_geometric_positive_log(self):
        v = bone.nnps_bone_test(NnpsFamily.geometric(), 0.5, 0.5)
        assert v.classification is BoneClass.POSITIVE_LOG
        assert v.max_residual < 1e-10

    def test_exponential_linear_log(self):
        v = bone.nnps_bone_test(NnpsFamily.exponential(), 2.0, 0.3)
        assert v.classification is BoneClass.LINEAR_LOG
        assert v.h == pytest.approx(0.6, abs=1e-8)  # Poisson map a*theta

    def test_binomial_negative_log(self):
        v = bone.nnps_bone_test(NnpsFamily.binomial(5), 0.7, 0.5)
        assert v.classification is BoneClass.NEGATIVE_LOG
        # Bernoulli odds map from the closed-form table
        assert v.h == pytest.approx(0.5 * 0.7 / (1 + 0.5 * 0.7), abs=1e-8)
        assert v.fitted_params == pytest.approx((1.0, 5.0), abs=1e-6)

    def test_cubic_gap_not_bone(self):
        v = bone.nnps_bone_test(NnpsFamily.cubic_gap(), 0.5, 0.5)
        assert v.classification is BoneClass.NOT_BONE
        assert v.max_residual > 1e-4

    def test_linear_times_exp_not_bone(self):
        v = bone.nnps_bone_test(NnpsFamily.linear_times_exp(), 1.0, 0.5)
        assert v.classification is BoneClass.NOT_BONE
        assert v.max_residual > 1e-4

    def test_geometric_h_matches_thin_map(self):
        theta, a = 0.5, 0.5
        v = bone.nnps_bone_test(NnpsFamily.geometric(), theta, a)
        closed = NegativeBinomial(1.0, theta).thin(a).theta
        assert v.h == pytest.approx(closed, abs=1e-8)

    def test_requires_a1_positive(self):
        fam = NnpsFamily.from_coeffs((1.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            bone.nnps_bone_test(fam, 0.5, 0.5)

    def test_requires_interior_a(self):
        with pytest.raises(ValueError):
            bone.nnps_bone_test(NnpsFamily.geometric(), 0.5, 1.0)


class TestCauchyClassifier:
    def test_linear_recovery(self):
        v = bone.cauchy_classify(lambda t: 2.0 * t)
        assert v.classification is BoneClass.LINEAR_LOG
        assert v.fitted_params[0] == pytest.approx(2.0, rel=1e-6)
        assert v.max_residual < 1e-8

    def test_logarithmic_recovery(self):
        v = bone.cauchy_classify(lambda t: 3.0 * math.log(1.0 + 0.5 * t))
        assert v.classification in (BoneClass.POSITIVE_LOG, BoneClass.NEGATIVE_LOG)
        assert v.fitted_params == pytest.approx((0.5, 3.0), rel=1e-4)

    def test_convex_log_recovery(self):
        # f = -log(1 - 0.4 t): the negative-binomial-shaped branch
        v = bone.cauchy_classify(lambda t: -math.log(1.0 - 0.4 * t))
        assert v.classification is BoneClass.POSITIVE_LOG
        assert v.fitted_params == pytest.approx((-0.4, -1.0), rel=1e-4)

    def test_hypothesis_violation(self):
        with pytest.raises(HypothesisViolationError):
            bone.cauchy_classify(lambda t: t * t)

    def test_non_solution_rejected(self):
        v = bone.cauchy_classify(lambda t: t + t**3)
        assert v.classification is BoneClass.NOT_BONE


class TestAtomicCounterexample:
    def test_deterministic_two(self):
        assert bone.atomic_counterexample(Deterministic(2)) < 1e-10

    def test_deterministic_two_value_at_zero(self):
        # left side ((0+1)/2)^2; right side P(Binomial(2, 1/2) = 0)
        lhs = float(Deterministic(2).pgf(0.5))
        rhs = float(Binomial(2, 0.5).pmf(0))
        assert lhs == 0.25
        assert rhs == pytest.approx(0.25, abs=1e-15)

    def test_poisson_base(self):
        assert bone.atomic_counterexample(Poisson(1.0)) < 1e-10

    def test_normalization_at_one(self):
        for base in (Deterministic(2), Poisson(1.0)):
            assert float(base.pgf(1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_two_point_pattern_counts_are_fair_thinnings(self):
        # Remark-style check through the construction: on a two-atom space
        # with equal masses, N(atom) is the base count thinned by fair coins.
        law = Discrete(("diamond", "square"), (0.5, 0.5))
        spec = stc.MeasureSpec(Deterministic(2), law)
        rng = np.random.default_rng(11)
        counts = np.array(
            [
                sum(1 for p in stc.sample_pattern(spec, rng).points if p == "diamond")
                for _ in range(50_000)
            ]
        )
        gof = stats.chi_square_counts(counts, Binomial(2, 0.5).pmf)
        assert gof.passed, str(gof)
