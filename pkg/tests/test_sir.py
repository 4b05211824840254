"""SIR dynamics, final size, infection density, and binomial label counts."""

import math
import warnings

import numpy as np
import pytest

from ptmeasures import sir, stats
from ptmeasures.counting import Binomial
from ptmeasures.errors import HorizonError, StepSizeError


@pytest.fixture(scope="module")
def traj():
    return sir.solve_sir(sir.SirParams(beta=2.0, gamma=1.0, rho=0.01))


def fixed_point_tau(r0, rho, tol=1e-10):
    """Independent final-size oracle: iterate tau -> 1 - exp(-R0(tau+rho))."""
    tau = 0.5
    for _ in range(10_000):
        nxt = 1.0 - math.exp(-r0 * (tau + rho))
        if abs(nxt - tau) < tol:
            return nxt
        tau = nxt
    raise RuntimeError("fixed point did not converge")


class TestSolve:
    def test_initial_conditions(self, traj):
        assert (traj.S[0], traj.I[0], traj.R[0]) == (1.0, 0.01, 0.0)

    def test_conservation(self, traj):
        assert traj.conservation_error() < 1e-6

    def test_first_integral_identity(self, traj):
        assert np.abs(traj.S * np.exp(traj.params.r0 * traj.R) - 1.0).max() < 1e-6

    def test_monotonic_mass_transfer(self, traj):
        assert np.all(np.diff(traj.S) <= 0)
        assert np.all(np.diff(traj.R) >= 0)

    def test_terminal_size_matches_final_size(self, traj):
        assert traj.S[-1] == pytest.approx(1.0 - traj.tau, abs=1e-6)

    def test_requires_r0_above_one(self):
        with pytest.raises(ValueError):
            sir.SirParams(beta=1.0, gamma=2.0, rho=0.01)

    def test_short_horizon_warns(self):
        with pytest.warns(UserWarning):
            sir.solve_sir(sir.SirParams(beta=2.0, gamma=1.0, rho=0.01), t_max=1.0)

    def test_unstable_step_raises(self):
        with pytest.raises(StepSizeError):
            sir.solve_sir(sir.SirParams(beta=30.0, gamma=1.0, rho=0.5), t_max=400.0, dt=3.0)


class TestFinalSize:
    def test_reference_value(self):
        tau = sir.final_size(2.0, 0.01)
        assert tau == pytest.approx(fixed_point_tau(2.0, 0.01), abs=1e-9)
        assert tau == pytest.approx(0.80347, abs=5e-6)

    @pytest.mark.parametrize("r0,rho", [(1.5, 0.01), (2.0, 0.2), (5.0, 1e-4), (1.2, 0.5)])
    def test_defining_residual(self, r0, rho):
        tau = sir.final_size(r0, rho)
        assert 0.0 < tau < 1.0
        assert abs(1.0 - tau - math.exp(-r0 * (tau + rho))) < 1e-12

    def test_monotone_in_rho(self):
        taus = [sir.final_size(2.0, rho) for rho in (0.01, 0.1, 1.0, 5.0)]
        assert all(a < b for a, b in zip(taus, taus[1:]))
        assert taus[-1] > 0.9999


class TestInfectionDensity:
    def test_nonnegative_and_normalized(self, traj):
        dens = sir.infection_density(traj)
        assert all(v >= 0.0 for v in dens.density)
        assert dens.mass(((0.0, traj.t[-1]),)) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("t", [1.0, 3.0, 10.0])
    def test_cdf_matches_survival_relation(self, traj, t):
        # nu((0, t]) = (1 - S_t)/tau from S_t = tau S~_t + 1 - tau
        dens = sir.infection_density(traj)
        assert dens.mass(((0.0, t),)) == pytest.approx(
            (1.0 - traj.s_at(t)) / traj.tau, abs=1e-7
        )

    def test_short_trajectory_rejected(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            short = sir.solve_sir(sir.SirParams(beta=2.0, gamma=1.0, rho=0.01), t_max=2.0)
        with pytest.raises(HorizonError):
            sir.infection_density(short)


class TestRecoveryKernel:
    def test_shift_positivity(self):
        kernel = sir.recovery_kernel(sir.SirParams(beta=2.0, gamma=1.0, rho=0.01))
        rng = np.random.default_rng(0)
        ys = np.array([kernel.sampler((0.7,), rng) for _ in range(500)])
        assert np.all(ys > 0.7)

    def test_mean_delay(self):
        gamma = 2.0
        kernel = sir.recovery_kernel(sir.SirParams(beta=4.0, gamma=gamma, rho=0.01))
        u = np.random.default_rng(1).random(100_000)
        ys = kernel.bulk_sampler((np.zeros(u.size),), u[:, None])
        mean, se = stats.mean_stderr(ys)
        assert mean == pytest.approx(1.0 / gamma, abs=4 * se)

    @pytest.mark.parametrize("u_shift", [0.25, 0.5, 1.0])
    def test_exponential_tail(self, u_shift):
        gamma = 2.0
        kernel = sir.recovery_kernel(sir.SirParams(beta=4.0, gamma=gamma, rho=0.01))
        u = np.random.default_rng(2).random(200_000)
        delays = kernel.bulk_sampler((np.zeros(u.size),), u[:, None])
        p = (delays > u_shift).mean()
        target = math.exp(-gamma * u_shift)
        assert p == pytest.approx(target, abs=4 * math.sqrt(target * (1 - target) / u.size))

    def test_integrator_closed_form(self):
        gamma, s = 2.0, 1.5
        kernel = sir.recovery_kernel(sir.SirParams(beta=4.0, gamma=gamma, rho=0.01))
        val = kernel.integrate((0.3,), lambda y: math.exp(-s * (y - 0.3)))
        assert val == pytest.approx(gamma / (gamma + s), rel=1e-10)


class TestLabels:
    def test_at_zero(self, traj):
        assert sir.label_probabilities(traj, 0.0) == (1.0, 0.0, 0.0)

    def test_partition_sums_to_one(self, traj):
        for t in (0.5, 2.0, 7.0):
            p_s, p_i, p_r = sir.label_probabilities(traj, t)
            assert p_s + p_i + p_r == pytest.approx(1.0, abs=1e-15)
            assert min(p_s, p_i, p_r) >= 0.0

    def test_late_time_limit(self, traj):
        p_s, p_i, p_r = sir.label_probabilities(traj, float(traj.t[-1]))
        assert p_s == pytest.approx(1.0 - traj.tau, abs=1e-6)
        assert p_i == pytest.approx(0.0, abs=1e-6)
        assert p_r == pytest.approx(traj.tau, abs=1e-6)

    def test_pmf_all_susceptible(self, traj):
        n, t = 12, 2.0
        assert sir.label_count_pmf(n, traj, t, 0, 0) == pytest.approx(
            sir.label_probabilities(traj, t)[0] ** n, rel=1e-12
        )

    def test_pmf_normalization(self, traj):
        n, t = 9, 3.0
        total = sum(
            sir.label_count_pmf(n, traj, t, ki, kr)
            for ki in range(n + 1)
            for kr in range(n + 1 - ki)
        )
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_marginal_is_binomial(self, traj):
        n, t = 11, 3.0
        s_t = traj.s_at(t)
        law = Binomial(n, 1.0 - s_t)
        for m in range(n + 1):
            marginal = sum(
                sir.label_count_pmf(n, traj, t, ki, m - ki) for ki in range(m + 1)
            )
            assert marginal == pytest.approx(float(law.pmf(m)), rel=1e-10)


class TestSimulateLabels:
    def test_counts_and_moments(self, traj):
        n, t, reps = 20, 3.0, 30_000
        lab = sir.simulate_labels(n, traj, t, reps, seed=7)
        s_t = traj.s_at(t)
        assert lab.joint.sum() == reps
        assert lab.ka_mean == pytest.approx(n * (1 - s_t), abs=4 * lab.ka_mean_se)
        assert lab.ka_var == pytest.approx(n * s_t * (1 - s_t), abs=4 * lab.ka_var_se)

    def test_joint_chi_square(self, traj):
        n, t, reps = 20, 3.0, 30_000
        lab = sir.simulate_labels(n, traj, t, reps, seed=7)
        observed = lab.joint.reshape(-1).astype(float)
        expected = np.array(
            [
                sir.label_count_pmf(n, traj, t, ki, kr)
                for ki in range(n + 1)
                for kr in range(n + 1)
            ]
        )
        gof = stats.chi_square_gof(observed, expected)
        assert gof.passed, str(gof)

    def test_restricted_count_chi_square(self, traj):
        n, t, reps = 20, 1.0, 30_000
        pair = sir.label_counts_bulk(n, traj, t, reps, seed=3)
        k_a = pair.sum(axis=1)
        law = Binomial(n, 1.0 - traj.s_at(t))
        gof = stats.chi_square_counts(k_a, law.pmf)
        assert gof.passed, str(gof)

    def test_replicate_stability(self, traj):
        a = sir.label_counts_bulk(20, traj, 3.0, 200, seed=5)
        b = sir.label_counts_bulk(20, traj, 3.0, 400, seed=5)
        np.testing.assert_array_equal(a, b[:200])
