"""Small statistical helpers: moment estimates with standard errors and a
chi-square goodness-of-fit check with cell pooling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2


def mean_stderr(x: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(n))


def var_stderr(x: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its asymptotic standard error.

    Uses se(S^2) ~ sqrt((m4 - m2^2) / n) with central sample moments.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    m2 = float((d**2).mean())
    m4 = float((d**4).mean())
    var = m2 * n / (n - 1)
    se = np.sqrt(max(m4 - m2**2, 0.0) / n)
    return var, float(se)


def cov_stderr(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Sample covariance and the standard error of its moment estimator."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    d = (x - x.mean()) * (y - y.mean())
    cov = float(d.sum() / (n - 1))
    se = float(d.std(ddof=1) / np.sqrt(n))
    return cov, se


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    critical: float
    passed: bool
    cells: int

    def __str__(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return (
            f"chi2={self.statistic:.2f} dof={self.dof} "
            f"crit={self.critical:.2f} [{tag}]"
        )


def chi_square_gof(
    observed: np.ndarray,
    expected_probs: np.ndarray,
    level: float = 0.99,
    min_expected: float = 5.0,
) -> ChiSquareResult:
    """Goodness-of-fit test with pooling of low-expectation cells.

    ``observed`` are counts per category and ``expected_probs`` the model
    probabilities for the same categories; any probability mass not covered
    by the categories is added as an extra zero-observation cell.  Cells
    with expected count below ``min_expected`` are pooled into one.
    """
    observed = np.asarray(observed, dtype=float)
    expected_probs = np.asarray(expected_probs, dtype=float)
    if observed.shape != expected_probs.shape:
        raise ValueError("observed and expected_probs must align")
    n = observed.sum()
    residual = max(1.0 - expected_probs.sum(), 0.0)
    obs = np.append(observed, 0.0)
    exp = np.append(expected_probs * n, residual * n)

    # zero-expectation cells: drop when empty, hard-fail when occupied
    zero = exp == 0.0
    if np.any(zero & (obs > 0)):
        return ChiSquareResult(float("inf"), 1, float(chi2.ppf(level, 1)), False, 1)
    obs, exp = obs[~zero], exp[~zero]

    keep = exp >= min_expected
    pooled_obs = obs[keep]
    pooled_exp = exp[keep]
    if not keep.all():
        pooled_obs = np.append(pooled_obs, obs[~keep].sum())
        pooled_exp = np.append(pooled_exp, exp[~keep].sum())
    if pooled_exp.size < 2:
        raise ValueError("too few cells with adequate expected counts")

    stat = float(((pooled_obs - pooled_exp) ** 2 / pooled_exp).sum())
    dof = pooled_exp.size - 1
    crit = float(chi2.ppf(level, dof))
    return ChiSquareResult(stat, dof, crit, stat <= crit, pooled_exp.size)


def chi_square_counts(samples: np.ndarray, pmf, level: float = 0.99) -> ChiSquareResult:
    """Chi-square GOF of integer ``samples`` against a pmf callable."""
    samples = np.asarray(samples, dtype=np.int64)
    kmax = int(samples.max())
    observed = np.bincount(samples, minlength=kmax + 1).astype(float)
    probs = np.array([float(pmf(k)) for k in range(kmax + 1)])
    return chi_square_gof(observed, probs, level=level)
