"""The experiments behind the ``ptm`` runner.

Each experiment returns a JSON-able dict with ``results`` (analytic and
empirical values) and ``checks`` (named pass/fail entries whose
thresholds are fixed here, not configurable).  Replicated work runs in
fixed chunks of replicate indices, so the same seed gives byte-identical
results for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bone, compound, sir, stats, stc, streams, traffic
from .counting import Binomial, CountingLaw, NnpsFamily, Poisson
from .spatial import Box, UniformInterval

CHUNK = 1 << 16
SIGMA_BAND = 4.0
CHI_LEVEL = 0.99


def chunked_rows(fn, n_rep: int, threads: int = 1, chunk: int = CHUNK) -> np.ndarray:
    """Concatenate fn(rep_lo, count) row blocks over fixed replicate chunks.

    Blocks are indexed by absolute replicate ids, so the result does not
    depend on ``threads`` or ``chunk`` boundaries reachable from them.
    """
    spans = [(lo, min(lo + chunk, n_rep) - lo) for lo in range(0, n_rep, chunk)]
    if threads <= 1 or len(spans) == 1:
        parts = [fn(lo, cnt) for lo, cnt in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda span: fn(*span), spans))
    return np.concatenate(parts, axis=0)


def _check(name: str, observed, expected, tolerance, passed: bool) -> dict:
    return {
        "name": name,
        "observed": float(observed),
        "expected": float(expected),
        "tolerance": tolerance,
        "passed": bool(passed),
    }


def _band_check(name: str, observed: float, expected: float, se: float) -> dict:
    tol = SIGMA_BAND * se
    return _check(name, observed, expected, tol, abs(observed - expected) <= tol)


def _gof_check(name: str, gof: stats.ChiSquareResult) -> dict:
    return _check(name, gof.statistic, gof.critical, f"chi2 {CHI_LEVEL:.0%}", gof.passed)


# ---------------------------------------------------------------------------


def thin_verify(
    law: CountingLaw,
    a_values,
    n_rep: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Thinning invariance: N(0, a] under Uniform(0,1) matches thin(a).

    Chi-square at 99% per retention fraction plus the thinned first and
    factorial moment identities at 4 standard errors.
    """
    c, delta2 = law.moments()
    checks = []
    table = []
    for j, a in enumerate(a_values):
        sub_seed = streams.child_seed(seed, j)
        spec = stc.MeasureSpec(law, UniformInterval(0.0, 1.0))
        counts = chunked_rows(
            lambda lo, cnt: stc.sample_counts_bulk(
                spec, [((0.0, a),)], sub_seed, cnt, rep_lo=lo
            ),
            n_rep,
            threads,
        )[:, 0]
        thinned = law.thin(a)
        gof = stats.chi_square_counts(counts, thinned.pmf, level=CHI_LEVEL)
        mean, mean_se = stats.mean_stderr(counts)
        fact, fact_se = stats.mean_stderr(counts * (counts - 1.0))
        checks.append(_gof_check(f"gof[a={a}]", gof))
        checks.append(_band_check(f"mean[a={a}]", mean, a * c, mean_se))
        checks.append(
            _band_check(
                f"factorial_moment[a={a}]", fact, a * a * (delta2 + c * c - c), fact_se
            )
        )
        table.append(
            {
                "a": a,
                "thinned_law": repr(thinned),
                "chi2": gof.statistic,
                "chi2_dof": gof.dof,
                "mean": mean,
                "mean_se": mean_se,
                "factorial_moment": fact,
                "factorial_moment_se": fact_se,
            }
        )
    return {"results": {"law": repr(law), "per_a": table}, "checks": checks}


def bone_check(
    kind: str,
    law: CountingLaw | None = None,
    family: NnpsFamily | None = None,
    theta: float | None = None,
    a: float = 0.5,
    expect_class: str | None = None,
) -> dict:
    """Closure residual for a PT law, or the NNPS verdict for a family."""
    checks = []
    if kind == "pt":
        resid = bone.bone_residual(law, a)
        checks.append(_check("pt_residual", resid, 0.0, 1e-12, resid < 1e-12))
        results = {"law": repr(law), "a": a, "residual": resid}
    elif kind == "nnps":
        verdict = bone.nnps_bone_test(family, theta, a)
        results = {
            "family": family.name,
            "theta": theta,
            "a": a,
            "classification": verdict.classification.value,
            "max_residual": verdict.max_residual,
            "fitted_params": verdict.fitted_params,
            "h": verdict.h,
            "notes": verdict.notes,
        }
        if expect_class is not None:
            checks.append(
                {
                    "name": "classification",
                    "observed": verdict.classification.value,
                    "expected": expect_class,
                    "tolerance": "exact",
                    "passed": verdict.classification.value == expect_class,
                }
            )
    else:
        raise ValueError(f"unknown bone-check kind {kind!r}")
    return {"results": results, "checks": checks}


def compound_experiment(
    model: compound.StoreModel,
    a_event,
    n_rep: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Observed/unobserved spend decomposition with Monte Carlo confirmation."""
    ez, ez_a, ez_c = compound.decompose_total(model, a_event)
    var_z = compound.z_moments(model, model.full_horizon())[1]
    var_a = compound.z_moments(model, a_event)[1]
    cov = compound.z_covariance(model, a_event)

    totals = chunked_rows(
        lambda lo, cnt: compound.store_totals_bulk(model, a_event, seed, cnt, rep_lo=lo),
        n_rep,
        threads,
    )
    z, z_a = totals[:, 0], totals[:, 1]
    z_c = z - z_a
    mean_z = stats.mean_stderr(z)
    mean_a = stats.mean_stderr(z_a)
    mean_c = stats.mean_stderr(z_c)
    evar_z = stats.var_stderr(z)
    evar_a = stats.var_stderr(z_a)
    ecov = stats.cov_stderr(z_a, z_c)

    add_gap = abs(ez - (ez_a + ez_c))
    checks = [
        _check("additivity", add_gap, 0.0, 1e-9 * max(ez, 1.0), add_gap <= 1e-9 * max(ez, 1.0)),
        _band_check("mean_Z", mean_z[0], ez, mean_z[1]),
        _band_check("mean_Z_A", mean_a[0], ez_a, mean_a[1]),
        _band_check("mean_Z_Ac", mean_c[0], ez_c, mean_c[1]),
        _band_check("var_Z", evar_z[0], var_z, evar_z[1]),
        _band_check("var_Z_A", evar_a[0], var_a, evar_a[1]),
        _band_check("cov", ecov[0], cov, ecov[1]),
    ]
    if isinstance(model.counting, Poisson):
        checks.append(
            _check("cov_zero_poisson", ecov[0], 0.0, SIGMA_BAND * ecov[1],
                   abs(ecov[0]) <= SIGMA_BAND * ecov[1])
        )
    else:
        checks.append(
            _check("cov_positive_negbin", ecov[0], cov, SIGMA_BAND * ecov[1],
                   ecov[0] - SIGMA_BAND * ecov[1] > 0.0)
        )
    results = {
        "analytic": {
            "mean_Z": ez, "mean_Z_A": ez_a, "mean_Z_Ac": ez_c,
            "var_Z": var_z, "var_Z_A": var_a, "cov": cov,
        },
        "empirical": {
            "mean_Z": mean_z, "mean_Z_A": mean_a, "mean_Z_Ac": mean_c,
            "var_Z": evar_z, "var_Z_A": evar_a, "cov": ecov,
        },
    }
    return {"results": results, "checks": checks}


def sir_experiment(
    params: sir.SirParams,
    n: int,
    t_values,
    n_rep: int,
    seed: int,
    dt: float = 1e-3,
    t_max: float | None = None,
    threads: int = 1,
    trajectory_stride: int = 0,
) -> dict:
    """Trajectory identities plus the binomial-restriction label experiment."""
    traj = sir.solve_sir(params, t_max=t_max, dt=dt)
    density = sir.infection_density(traj)
    tau_resid = abs(1.0 - traj.tau - np.exp(-params.r0 * (traj.tau + params.rho)))
    cons = traj.conservation_error()
    sir2 = traj.sir2_residual()
    checks = [
        _check("conservation", cons, 0.0, 1e-6, cons < 1e-6),
        _check("first_integral", sir2, 0.0, 1e-6, sir2 < 1e-6),
        _check("final_size_residual", tau_resid, 0.0, 1e-12, tau_resid < 1e-12),
    ]
    per_t = []
    for j, t in enumerate(t_values):
        sub_seed = streams.child_seed(seed, j)
        pair = chunked_rows(
            lambda lo, cnt: sir.label_counts_bulk(
                n, traj, t, cnt, sub_seed, rep_lo=lo, density=density
            ),
            n_rep,
            threads,
        )
        k_a = pair.sum(axis=1)
        s_t = traj.s_at(t)
        if not 0.0 < 1.0 - s_t < 1.0:
            raise ValueError(f"t={t} gives a degenerate restricted law (S_t={s_t})")
        target = Binomial(n, 1.0 - s_t)
        gof = stats.chi_square_counts(k_a, target.pmf, level=CHI_LEVEL)
        mean, mean_se = stats.mean_stderr(k_a)
        var, var_se = stats.var_stderr(k_a)
        checks.append(_gof_check(f"gof_KA[t={t}]", gof))
        checks.append(_band_check(f"mean_KA[t={t}]", mean, n * (1.0 - s_t), mean_se))
        checks.append(
            _band_check(f"var_KA[t={t}]", var, n * s_t * (1.0 - s_t), var_se)
        )
        per_t.append(
            {
                "t": t,
                "S_t": s_t,
                "labels": sir.label_probabilities(traj, t),
                "chi2": gof.statistic,
                "chi2_dof": gof.dof,
                "mean_KA": mean,
                "var_KA": var,
            }
        )
    results = {
        "tau": traj.tau,
        "s_inf": traj.s_inf,
        "conservation_error": cons,
        "first_integral_residual": sir2,
        "per_t": per_t,
    }
    if trajectory_stride > 0:
        idx = np.arange(0, traj.t.size, trajectory_stride)
        results["trajectory"] = [
            [float(traj.t[i]), float(traj.S[i]), float(traj.I[i]), float(traj.R[i])]
            for i in idx
        ]
    return {"results": results, "checks": checks}


def traffic_experiment(
    config: traffic.TrafficConfig,
    region_a: Box,
    region_b: Box,
    n_rep: int,
    seed: int,
    restrict_regions: tuple[Box, ...] = (),
    expect_verdict: str | None = None,
    threads: int = 1,
) -> dict:
    """Covariance signs across disjoint regions plus restriction fits."""
    counts = chunked_rows(
        lambda lo, cnt: traffic.region_counts_bulk(
            config, [region_a, region_b] + list(restrict_regions), seed, cnt, rep_lo=lo
        ),
        n_rep,
        threads,
    )
    cov, cov_se = stats.cov_stderr(counts[:, 0], counts[:, 1])
    verdict = (
        "zero" if abs(cov) <= SIGMA_BAND * cov_se else ("negative" if cov < 0 else "positive")
    )
    total_mass = traffic.mean_measure(config).value
    a_bar = traffic.mean_measure(config, region_a).value / total_mass
    b_bar = traffic.mean_measure(config, region_b).value / total_mass
    c, delta2 = config.counting.moments()
    analytic_cov = (delta2 - c) * a_bar * b_bar
    checks = [_band_check("cov_vs_analytic", cov, analytic_cov, cov_se)]
    if expect_verdict is not None:
        checks.append(
            {
                "name": "verdict",
                "observed": verdict,
                "expected": expect_verdict,
                "tolerance": "exact",
                "passed": verdict == expect_verdict,
            }
        )
    restrictions = []
    for j, region in enumerate(restrict_regions):
        summary = traffic.restrict_traffic(config, region)
        gof = stats.chi_square_counts(counts[:, 2 + j], summary.thinned.pmf, level=CHI_LEVEL)
        checks.append(_gof_check(f"gof_restrict[{j}]", gof))
        restrictions.append(
            {
                "region": [list(region.lo), list(region.hi)],
                "mass": summary.mass,
                "thinned_law": repr(summary.thinned),
                "chi2": gof.statistic,
                "chi2_dof": gof.dof,
            }
        )
    results = {
        "covariance": cov,
        "covariance_se": cov_se,
        "verdict": verdict,
        "analytic_covariance": analytic_cov,
        "normalized_masses": [a_bar, b_bar],
        "restrictions": restrictions,
    }
    return {"results": results, "checks": checks}


def laplace_experiment(
    spec: stc.MeasureSpec,
    functions: list[tuple[str, object]],
    n_rep: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Laplace functionals and Nf moments, analytic against Monte Carlo."""
    checks = []
    rows = []
    for j, (label, f) in enumerate(functions):
        sub_seed = streams.child_seed(seed, j)
        values = chunked_rows(
            lambda lo, cnt: stc.integrate_bulk(spec, f, sub_seed, cnt, rep_lo=lo)[:, None],
            n_rep,
            threads,
        )[:, 0]
        analytic = stc.laplace_analytic(spec, f)
        est, est_se = stats.mean_stderr(np.exp(-values))
        mean_an, var_an = stc.moments_analytic(spec, f)
        mean_emp = stats.mean_stderr(values)
        var_emp = stats.var_stderr(values)
        checks.append(_band_check(f"laplace[{label}]", est, analytic, est_se))
        checks.append(_band_check(f"mean_Nf[{label}]", mean_emp[0], mean_an, mean_emp[1]))
        checks.append(_band_check(f"var_Nf[{label}]", var_emp[0], var_an, var_emp[1]))
        rows.append(
            {
                "f": label,
                "laplace_analytic": analytic,
                "laplace_mc": [est, est_se],
                "mean_analytic": mean_an,
                "mean_mc": mean_emp,
                "var_analytic": var_an,
                "var_mc": var_emp,
            }
        )
    return {"results": {"per_function": rows}, "checks": checks}
