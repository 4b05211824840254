"""Compound spend totals: closed forms, additivity, and simulation."""

import numpy as np
import pytest

from ptmeasures import compound, stc
from ptmeasures.counting import Binomial, NegativeBinomial, Poisson
from ptmeasures.errors import UnsupportedFamilyError
from ptmeasures.spatial import DensityTable


def single_state_model(law, horizon=10.0, alpha=1.0, beta2=0.0):
    return compound.StoreModel(
        counting=law,
        horizon=horizon,
        state_probs=compound.PiecewiseStateProbs.constant([1.0], horizon),
        spend_mean=(alpha,),
        spend_var=(beta2,),
    )


@pytest.fixture
def rich_model():
    return compound.StoreModel(
        counting=NegativeBinomial(2.0, 0.5),
        horizon=7.0,
        state_probs=compound.PiecewiseStateProbs(
            breaks=(3.0, 7.0), probs=((0.3, 0.7), (0.6, 0.4))
        ),
        spend_mean=(10.0, 25.0),
        spend_var=(16.0, 100.0),
    )


class TestAnalyticMoments:
    def test_total_is_count_when_unit_spend(self):
        model = single_state_model(Poisson(2.0))
        mean, var = compound.z_moments(model, ((0.0, 10.0),))
        assert (mean, var) == pytest.approx((2.0, 2.0), rel=1e-12)

    def test_zero_mass_window(self):
        # arrival density vanishing on (0, 1] makes that window worthless
        grid = np.linspace(0.0, 10.0, 101)
        dens = np.where(grid <= 1.0, 0.0, 1.0)
        law = DensityTable.normalized(grid, dens)
        model = compound.StoreModel(
            counting=Poisson(2.0),
            horizon=10.0,
            state_probs=compound.PiecewiseStateProbs.constant([1.0], 10.0),
            spend_mean=(1.0,),
            spend_var=(0.0,),
            arrival_law=law,
        )
        assert compound.z_moments(model, ((0.0, 1.0),)) == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_poisson_variance_has_no_squared_term(self):
        model = single_state_model(Poisson(2.0), alpha=3.0, beta2=4.0)
        window = ((0.0, 5.0),)
        _, var = compound.z_moments(model, window)
        # c * integral of p (alpha^2 + beta^2): 2 * 0.5 * (9 + 4)
        assert var == pytest.approx(2.0 * 0.5 * 13.0, rel=1e-12)

    def test_variance_decomposition_identity(self, rich_model):
        a_event = ((0.0, 2.0), (5.0, 6.0))
        comp = rich_model.complement(a_event)
        var_full = compound.z_moments(rich_model, rich_model.full_horizon())[1]
        var_a = compound.z_moments(rich_model, a_event)[1]
        var_c = compound.z_moments(rich_model, comp)[1]
        cov = compound.z_covariance(rich_model, a_event)
        assert var_full == pytest.approx(var_a + var_c + 2 * cov, rel=1e-12)


class TestCovariance:
    def test_poisson_zero(self):
        model = single_state_model(Poisson(2.0))
        assert compound.z_covariance(model, ((0.0, 5.0),)) == 0.0

    def test_negative_binomial_halves(self):
        model = single_state_model(NegativeBinomial(2.0, 0.5))
        assert compound.z_covariance(model, ((0.0, 5.0),)) == pytest.approx(0.5, rel=1e-12)

    def test_full_window_has_empty_complement(self):
        model = single_state_model(NegativeBinomial(2.0, 0.5))
        assert compound.z_covariance(model, ((0.0, 10.0),)) == 0.0


class TestDecomposition:
    def test_symmetric_split(self):
        model = single_state_model(NegativeBinomial(2.0, 0.5))
        ez, ez_a, ez_c = compound.decompose_total(model, ((0.0, 5.0),))
        assert ez_a == pytest.approx(ez_c, rel=1e-12)
        assert ez == pytest.approx(2.0, rel=1e-12)

    def test_additivity_exact(self, rich_model):
        ez, ez_a, ez_c = compound.decompose_total(rich_model, ((0.0, 2.0), (5.0, 6.0)))
        assert ez == pytest.approx(ez_a + ez_c, rel=1e-14)
        full = compound.z_moments(rich_model, rich_model.full_horizon())[0]
        assert ez == pytest.approx(full, rel=1e-12)


class TestSimulation:
    def test_empirical_matches_analytic(self, rich_model):
        a_event = ((0.0, 2.0), (5.0, 6.0))
        sim = compound.simulate_store(rich_model, a_event, 100_000, seed=7)
        mean_a, var_a = compound.z_moments(rich_model, a_event)
        cov = compound.z_covariance(rich_model, a_event)
        assert sim.mean_za[0] == pytest.approx(mean_a, abs=4 * sim.mean_za[1])
        assert sim.var_za[0] == pytest.approx(var_a, abs=4 * sim.var_za[1])
        assert sim.cov[0] == pytest.approx(cov, abs=4 * sim.cov[1])

    def test_poisson_cov_zero_within_band(self):
        model = single_state_model(Poisson(2.0), alpha=5.0, beta2=9.0)
        sim = compound.simulate_store(model, ((0.0, 5.0),), 100_000, seed=8)
        assert abs(sim.cov[0]) <= 4 * sim.cov[1]

    def test_negbin_cov_strictly_positive(self):
        model = single_state_model(NegativeBinomial(2.0, 0.5), alpha=5.0, beta2=9.0)
        sim = compound.simulate_store(model, ((0.0, 5.0),), 100_000, seed=9)
        assert sim.cov[0] - 4 * sim.cov[1] > 0

    def test_rejects_empty_run(self, rich_model):
        with pytest.raises(ValueError):
            compound.simulate_store(rich_model, ((0.0, 2.0),), 0, seed=1)

    def test_deterministic_replicates(self, rich_model):
        a = compound.store_totals_bulk(rich_model, ((0.0, 2.0),), seed=3, n_rep=100)
        b = compound.store_totals_bulk(rich_model, ((0.0, 2.0),), seed=3, n_rep=300)
        np.testing.assert_array_equal(a, b[:100])


class TestSpecBridge:
    def test_matches_marked_measure_moments(self, rich_model):
        spec = compound.as_measure_spec(rich_model)
        mean, var = stc.moments_analytic(spec, lambda t, x, y: y)
        full_mean, full_var = compound.z_moments(rich_model, rich_model.full_horizon())
        assert mean == pytest.approx(full_mean, rel=2e-3)  # quadrature tolerance
        assert var == pytest.approx(full_var, rel=2e-3)

    def test_spend_kernel_moments_exact(self, rich_model):
        kernel = compound.spend_kernel(rich_model)
        for x, (alpha, beta2) in enumerate(
            zip(rich_model.spend_mean, rich_model.spend_var)
        ):
            ey = kernel.integrate((0.0, x), lambda y: y)
            ey2 = kernel.integrate((0.0, x), lambda y: y * y)
            assert ey == pytest.approx(alpha, rel=1e-10)
            assert ey2 == pytest.approx(alpha * alpha + beta2, rel=1e-10)

    def test_state_kernel_matches_probs(self, rich_model):
        kernel = compound.state_kernel(rich_model)
        probs = rich_model.state_probs(1.0)
        mean_state = kernel.integrate((1.0,), lambda x: x)
        assert mean_state == pytest.approx(float(probs @ np.arange(2)), rel=1e-12)


class TestValidation:
    def test_rejects_binomial_counting(self):
        with pytest.raises(UnsupportedFamilyError):
            single_state_model(Binomial(5, 0.5))

    def test_rejects_bad_state_probs(self):
        with pytest.raises(ValueError):
            compound.PiecewiseStateProbs((5.0,), ((0.5, 0.4),))

    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            compound.StoreModel(
                counting=Poisson(1.0),
                horizon=5.0,
                state_probs=compound.PiecewiseStateProbs.constant([1.0], 5.0),
                spend_mean=(1.0,),
                spend_var=(-1.0,),
            )

    def test_rejects_moment_length_mismatch(self):
        with pytest.raises(ValueError):
            compound.StoreModel(
                counting=Poisson(1.0),
                horizon=5.0,
                state_probs=compound.PiecewiseStateProbs.constant([0.5, 0.5], 5.0),
                spend_mean=(1.0,),
                spend_var=(0.0,),
            )
