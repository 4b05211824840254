"""Deterministic SIR dynamics read as a binomial random measure.

The mass-transfer ODE system yields a survival curve S_t; conditioning
on eventual infection (probability tau, the final size) turns -dS/tau
into a proper infection-time density, and recovery times follow the
infection time plus an exponential holding time.  Surveying n
individuals then forms a random measure with K ~ Binomial(n, tau) over
infection/recovery pairs, whose restriction to (0, t] stays binomial
with success probability 1 - S_t.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_laguerre

from . import stats, streams
from .counting import Binomial
from .errors import HorizonError, StepSizeError
from .spatial import DensityTable
from .stc import MarkKernel

CONSERVATION_TOL = 1e-6
_EXTINCTION_LEVEL = 1e-8


@dataclass(frozen=True)
class SirParams:
    beta: float
    gamma: float
    rho: float

    def __post_init__(self):
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")
        if self.rho <= 0:
            raise ValueError("initial infected mass rho must be positive")
        if not self.r0 > 1.0:
            raise ValueError("R0 = beta/gamma must exceed 1")

    @property
    def r0(self) -> float:
        return self.beta / self.gamma


@dataclass(frozen=True)
class SirTrajectory:
    params: SirParams
    t: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    tau: float

    @property
    def s_inf(self) -> float:
        return 1.0 - self.tau

    def conservation_error(self) -> float:
        with np.errstate(invalid="ignore", over="ignore"):  # blow-ups give NaN
            return float(np.abs(self.S + self.I + self.R - (1.0 + self.params.rho)).max())

    def sir2_residual(self) -> float:
        """Max residual of the first integral S_t = exp(-R0 R_t)."""
        return float(np.abs(self.S - np.exp(-self.params.r0 * self.R)).max())

    def s_at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.S))

    def i_at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.I))


def final_size(r0: float, rho: float, tol: float = 1e-14) -> float:
    """Root tau in (0, 1) of 1 - tau = exp(-R0 (tau + rho)).

    Safeguarded Newton iteration: F is concave with F(0) > 0 > F(1), so
    the bracketed root is unique; bisection takes over whenever a Newton
    step leaves the bracket.
    """
    if not r0 > 1.0:
        raise ValueError("final size requires R0 > 1")
    if not rho > 0:
        raise ValueError("rho must be positive")

    def f(tau: float) -> float:
        return 1.0 - tau - math.exp(-r0 * (tau + rho))

    lo, hi = 0.0, 1.0
    tau = 0.5
    for _ in range(200):
        val = f(tau)
        if val > 0:
            lo = tau
        else:
            hi = tau
        deriv = -1.0 + r0 * math.exp(-r0 * (tau + rho))
        step = val / deriv if deriv != 0 else 0.0
        nxt = tau - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - tau) < tol:
            tau = nxt
            break
        tau = nxt
    return tau


def _rk4_rhs(s: float, i: float, beta: float, gamma: float):
    flow = beta * i * s
    return -flow, flow - gamma * i, gamma * i


def solve_sir(
    params: SirParams, t_max: float | None = None, dt: float = 1e-3
) -> SirTrajectory:
    """Classical fixed-step 4th-order integration from (1, rho, 0).

    With t_max omitted, the horizon extends until I drops below 1e-8.
    Raises StepSizeError if S+I+R drifts from 1+rho by more than 1e-6.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    beta, gamma = params.beta, params.gamma
    auto = t_max is None
    horizon = (50.0 / gamma) if auto else float(t_max)
    s, i, r = 1.0, params.rho, 0.0
    rows = [(s, i, r)]
    t = 0.0
    ts = [0.0]
    while True:
        while t < horizon - dt / 2:
            a1, b1, c1 = _rk4_rhs(s, i, beta, gamma)
            a2, b2, c2 = _rk4_rhs(s + dt / 2 * a1, i + dt / 2 * b1, beta, gamma)
            a3, b3, c3 = _rk4_rhs(s + dt / 2 * a2, i + dt / 2 * b2, beta, gamma)
            a4, b4, c4 = _rk4_rhs(s + dt * a3, i + dt * b3, beta, gamma)
            s += dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            i += dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            r += dt / 6 * (c1 + 2 * c2 + 2 * c3 + c4)
            t += dt
            rows.append((s, i, r))
            ts.append(t)
        if not auto or i < _EXTINCTION_LEVEL:
            break
        if horizon > 5e4 / gamma:
            warnings.warn("SIR auto-horizon cap reached before extinction")
            break
        horizon *= 2.0
    if i >= _EXTINCTION_LEVEL:
        warnings.warn(f"I(t_max) = {i:.3g} has not reached {_EXTINCTION_LEVEL}")
    arr = np.asarray(rows)
    traj = SirTrajectory(
        params,
        np.asarray(ts),
        arr[:, 0],
        arr[:, 1],
        arr[:, 2],
        final_size(params.r0, params.rho),
    )
    drift = traj.conservation_error()
    if not drift <= CONSERVATION_TOL:  # NaN-safe: blow-ups must raise too
        raise StepSizeError(
            f"conservation drift {drift:.3g} exceeds {CONSERVATION_TOL}; reduce dt"
        )
    return traj


def infection_density(traj: SirTrajectory) -> DensityTable:
    """Infection-time density nu(x) = beta I_x S_x / tau as a table.

    Tail mass beyond the horizon is folded into the last cell; more than
    1e-3 of unresolved tail raises HorizonError.
    """
    dens = traj.params.beta * traj.I * traj.S / traj.tau
    cells = np.diff(traj.t) * (dens[:-1] + dens[1:]) / 2.0
    tail = 1.0 - cells.sum()
    if tail > 1e-3:
        raise HorizonError(
            f"unresolved tail mass {tail:.3g}; extend t_max before tabulating"
        )
    if tail > 1e-6:
        warnings.warn(f"folding tail mass {tail:.3g} into the last cell")
    if tail > 0:
        dens = dens.copy()
        dens[-1] += 2.0 * tail / (traj.t[-1] - traj.t[-2])
    return DensityTable.normalized(traj.t, dens)


def recovery_kernel(params: SirParams, n_quad: int = 64) -> MarkKernel:
    """Kernel Q(x, dy): y = x + Exponential(gamma) recovery times."""
    rate = params.gamma
    nodes, weights = roots_laguerre(n_quad)

    def sampler(point, rng):
        return point[0] + rng.exponential(1.0 / rate)

    def mean_integrator(point, fn):
        x = point[0]
        return float(sum(w * fn(x + z / rate) for z, w in zip(nodes, weights)))

    def bulk_sampler(columns, u):
        return columns[0] - np.log1p(-u[:, 0]) / rate

    return MarkKernel(
        sampler,
        mean_integrator=mean_integrator,
        bulk_sampler=bulk_sampler,
        label="recovery",
    )


def label_probabilities(traj: SirTrajectory, t: float) -> tuple[float, float, float]:
    """(P(S), P(I), P(R)) for one surveyed individual at time t."""
    p_s = traj.s_at(t)
    tau_i = traj.i_at(t) - traj.params.rho * math.exp(-traj.params.gamma * t)
    if tau_i < -1e-9:
        raise RuntimeError(f"tau*I~ = {tau_i:.3g} is negative beyond tolerance")
    tau_i = max(tau_i, 0.0)
    return p_s, tau_i, 1.0 - p_s - tau_i


def label_count_pmf(
    n: int, traj: SirTrajectory, t: float, k_i: int, k_r: int
) -> float:
    """Trinomial law of observed (infectious, recovered) counts among n."""
    if k_i < 0 or k_r < 0 or k_i + k_r > n:
        return 0.0
    p_s, p_i, p_r = label_probabilities(traj, t)
    k_s = n - k_i - k_r
    log_coeff = (
        gammaln(n + 1) - gammaln(k_i + 1) - gammaln(k_r + 1) - gammaln(k_s + 1)
    )
    terms = 0.0
    for k, p in ((k_i, p_i), (k_r, p_r), (k_s, p_s)):
        if k > 0:
            if p <= 0.0:
                return 0.0
            terms += k * math.log(p)
    return float(math.exp(log_coeff + terms))


@dataclass(frozen=True)
class LabelExperiment:
    """Empirical joint (k_I, k_R) counts over seeded replicates."""

    n: int
    t: float
    joint: np.ndarray  # (n+1, n+1) counts matrix
    ka_mean: float
    ka_mean_se: float
    ka_var: float
    ka_var_se: float
    fact_mean: float
    fact_se: float


def label_counts_bulk(
    n: int,
    traj: SirTrajectory,
    t: float,
    n_rep: int,
    seed: int,
    rep_lo: int = 0,
    density: DensityTable | None = None,
) -> np.ndarray:
    """(n_rep, 2) matrix of (k_I, k_R) counts for seeded replicates.

    Each replicate draws K ~ Binomial(n, tau) eventually-infected
    individuals, infection times from the conditional density, and
    recovery delays; points split by comparing (x, y) with t.
    """
    if density is None:
        density = infection_density(traj)
    law = Binomial(n, traj.tau)
    reps = np.arange(rep_lo, rep_lo + n_rep, dtype=np.int64)
    counts = law.ppf(streams.uniforms(seed, reps, 0, 0))
    total = int(counts.sum())
    rep_ids = np.repeat(reps, counts)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    within = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts)
    xs = density.ppf(streams.uniforms(seed, rep_ids, 1, within))
    ys = xs - np.log1p(-streams.uniforms(seed, rep_ids, 2, within)) / traj.params.gamma

    rel = rep_ids - rep_lo
    infected_by_t = xs <= t
    still_infectious = infected_by_t & (ys > t)
    recovered = infected_by_t & (ys <= t)
    k_i = np.bincount(rel[still_infectious], minlength=n_rep)
    k_r = np.bincount(rel[recovered], minlength=n_rep)
    return np.column_stack([k_i, k_r])


def simulate_labels(
    n: int,
    traj: SirTrajectory,
    t: float,
    n_rep: int,
    seed: int,
) -> LabelExperiment:
    """Replicated label counts via the STC with K ~ Binomial(n, tau)."""
    if n_rep < 1:
        raise ValueError("n_rep must be positive")
    pair = label_counts_bulk(n, traj, t, n_rep, seed)
    k_i, k_r = pair[:, 0], pair[:, 1]
    k_a = k_i + k_r

    joint = np.zeros((n + 1, n + 1), dtype=np.int64)
    np.add.at(joint, (k_i, k_r), 1)
    mean, mean_se = stats.mean_stderr(k_a)
    var, var_se = stats.var_stderr(k_a)
    fact = k_a.astype(float) * (k_a - 1.0)
    fact_mean, fact_se = stats.mean_stderr(fact)
    return LabelExperiment(
        n, t, joint, mean, mean_se, var, var_se, fact_mean, fact_se
    )
