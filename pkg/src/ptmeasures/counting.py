"""Counting distributions for random measures.

The three Poisson-type (PT) families -- Poisson, binomial, negative
binomial -- carry an exact thinning map ``thin(a)`` sending the law of a
count to the law of the count restricted to a subset of probability
``a``.  Generic non-negative power series (NNPS) families with
``p_k = a_k theta^k / g(theta)`` are supported for pgf evaluation,
sampling, and the numeric classification experiments; they have no
thinning map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _stats

from .errors import DivergedSeriesError, UnsupportedFamilyError

SERIES_RTOL = 1e-15
SERIES_MAX_TERMS = 10**6
# consecutive sub-threshold terms required before truncating a
# function-backed series; guards families with gaps in the coefficients
_SERIES_CALM_TERMS = 8


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("pgf argument must lie in [0, 1]")
    return t


def _check_a(a: float) -> float:
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise ValueError(f"thinning fraction must be in (0, 1], got {a}")
    return a


class CountingLaw:
    """Base class for non-negative integer counting laws."""

    is_pt: bool = False

    def pgf(self, t):
        """E t^K for t in [0, 1]."""
        raise NotImplementedError

    def apgf(self, t):
        """Alternate pgf E (1-t)^K, identically pgf(1 - t)."""
        t = _check_t(t)
        return self.pgf(1.0 - t)

    def pmf(self, k):
        raise NotImplementedError

    def moments(self) -> tuple[float, float]:
        """(mean, variance) of K."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return self.moments()[0]

    @property
    def variance(self) -> float:
        return self.moments()[1]

    def thin(self, a: float) -> "CountingLaw":
        """Law of the count kept by independent retention with probability a."""
        raise UnsupportedFamilyError(
            f"{type(self).__name__} is not Poisson-type; no thinning map exists"
        )

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def ppf(self, u):
        """Quantile function on uniforms in (0,1); inverse-CDF sampling."""
        raise NotImplementedError

    def support_bound(self, tail: float = 1e-12) -> int:
        """Smallest k with P(K > k) <= tail."""
        return int(self.ppf(np.asarray(1.0 - tail)))


@dataclass(frozen=True)
class Poisson(CountingLaw):
    lam: float

    is_pt = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("Poisson rate must be positive")

    def pgf(self, t):
        return np.exp(self.lam * (_check_t(t) - 1.0))

    def pmf(self, k):
        return _stats.poisson.pmf(k, self.lam)

    def moments(self):
        return (self.lam, self.lam)

    def thin(self, a):
        return Poisson(_check_a(a) * self.lam)

    def sample(self, rng, size=None):
        return rng.poisson(self.lam, size)

    def ppf(self, u):
        return _stats.poisson.ppf(u, self.lam).astype(np.int64)


@dataclass(frozen=True)
class Binomial(CountingLaw):
    n: int
    p: float

    is_pt = True

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError("binomial n must be an integer >= 1")
        if not 0.0 < self.p < 1.0:
            raise ValueError("binomial p must be in (0, 1)")

    def pgf(self, t):
        return (1.0 - self.p + self.p * _check_t(t)) ** self.n

    def pmf(self, k):
        return _stats.binom.pmf(k, self.n, self.p)

    def moments(self):
        return (self.n * self.p, self.n * self.p * (1.0 - self.p))

    def thin(self, a):
        return Binomial(self.n, _check_a(a) * self.p)

    def sample(self, rng, size=None):
        return rng.binomial(self.n, self.p, size)

    def ppf(self, u):
        return _stats.binom.ppf(u, self.n, self.p).astype(np.int64)

    def support_bound(self, tail: float = 1e-12) -> int:
        return self.n


@dataclass(frozen=True)
class NegativeBinomial(CountingLaw):
    """Negative binomial with shape r and series parameter theta in (0,1).

    pmf ~ C(k+r-1, k) (1-theta)^r theta^k; the geometric case is r = 1.
    """

    r: float
    theta: float

    is_pt = True

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("negative binomial shape r must be positive")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("negative binomial theta must be in (0, 1)")

    def pgf(self, t):
        return ((1.0 - self.theta) / (1.0 - self.theta * _check_t(t))) ** self.r

    def pmf(self, k):
        return _stats.nbinom.pmf(k, self.r, 1.0 - self.theta)

    def moments(self):
        mean = self.r * self.theta / (1.0 - self.theta)
        return (mean, mean / (1.0 - self.theta))

    def thin(self, a):
        a = _check_a(a)
        return NegativeBinomial(
            self.r, a * self.theta / (1.0 - (1.0 - a) * self.theta)
        )

    def sample(self, rng, size=None):
        return rng.negative_binomial(self.r, 1.0 - self.theta, size)

    def ppf(self, u):
        return _stats.nbinom.ppf(u, self.r, 1.0 - self.theta).astype(np.int64)


@dataclass(frozen=True)
class Deterministic(CountingLaw):
    """Point mass at k; the mixed-binomial (Dirac kappa) building block.

    Not Poisson-type: thinning a deterministic count gives a binomial one,
    which is the textbook example of a family not closed under thinning.
    """

    k: int

    def __post_init__(self):
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 0):
            raise ValueError("deterministic count must be an integer >= 0")

    def pgf(self, t):
        return _check_t(t) ** self.k

    def pmf(self, k):
        k = np.asarray(k)
        return np.where(k == self.k, 1.0, 0.0)

    def moments(self):
        return (float(self.k), 0.0)

    def sample(self, rng, size=None):
        if size is None:
            return self.k
        return np.full(size, self.k, dtype=np.int64)

    def ppf(self, u):
        return np.full(np.shape(u), self.k, dtype=np.int64)

    def support_bound(self, tail: float = 1e-12) -> int:
        return self.k


@dataclass(frozen=True)
class NnpsFamily:
    """Canonical non-negative power series coefficients (a_0 = 1).

    ``coef(k)`` returns a_k >= 0; ``radius_hint`` bounds the admissible
    theta domain.  ``degree`` is set for finite families, in which case
    series are summed exactly.
    """

    coef: Callable[[int], float]
    radius_hint: float
    name: str = "nnps"
    degree: int | None = None

    def __post_init__(self):
        if not self.radius_hint > 0:
            raise ValueError("radius_hint must be positive")
        if not math.isclose(self.coef(0), 1.0, rel_tol=0.0, abs_tol=0.0):
            raise ValueError("family must be canonical: a_0 = 1")

    @classmethod
    def from_coeffs(
        cls, coeffs: Sequence[float], radius_hint: float = math.inf, name: str = "nnps"
    ) -> "NnpsFamily":
        arr = tuple(float(a) for a in coeffs)
        if not arr or arr[0] != 1.0:
            raise ValueError("family must be canonical: a_0 = 1")
        if any(a < 0 for a in arr):
            raise ValueError("coefficients must be non-negative")

        def coef(k: int, _arr=arr) -> float:
            return _arr[k] if k < len(_arr) else 0.0

        return cls(coef, radius_hint, name, degree=len(arr) - 1)

    @classmethod
    def geometric(cls) -> "NnpsFamily":
        """a_k = 1; g(theta) = 1/(1-theta)."""
        return cls(lambda k: 1.0, 1.0, "geometric")

    @classmethod
    def exponential(cls) -> "NnpsFamily":
        """a_k = 1/k!; g(theta) = e^theta."""
        return cls(lambda k: 1.0 / math.factorial(k), math.inf, "exponential")

    @classmethod
    def binomial(cls, n: int) -> "NnpsFamily":
        """a_k = C(n, k); g(theta) = (1+theta)^n (Bernoulli odds parameter)."""
        return cls.from_coeffs([math.comb(n, k) for k in range(n + 1)], name=f"binomial{n}")

    @classmethod
    def cubic_gap(cls) -> "NnpsFamily":
        """g(theta) = 1 + theta + theta^3; a non-bone test family."""
        return cls.from_coeffs((1.0, 1.0, 0.0, 1.0), name="cubic_gap")

    @classmethod
    def linear_times_exp(cls) -> "NnpsFamily":
        """g(theta) = (1+theta) e^theta; a non-bone test family."""

        def coef(k: int) -> float:
            a = 1.0 / math.factorial(k)
            if k >= 1:
                a += 1.0 / math.factorial(k - 1)
            return a

        return cls(coef, math.inf, "linear_times_exp")

    def series(self, theta: float, moment: int = 0) -> float:
        """Sum a_k k(k-1)...(k-moment+1) theta^k, truncated per the calm rule.

        Raises DivergedSeriesError when the term cap is exceeded or the
        partial sums blow up.
        """
        theta = float(theta)  # small negative theta is fine inside the radius
        total = 0.0
        calm = 0
        kmax = self.degree if self.degree is not None else SERIES_MAX_TERMS
        pow_t = 1.0
        for k in range(kmax + 1):
            weight = 1.0
            for j in range(moment):
                weight *= k - j
            try:
                term = self.coef(k) * weight * pow_t
                total += term
                pow_t *= theta
            except OverflowError:
                raise DivergedSeriesError(
                    f"series for {self.name} overflowed at term {k}, theta={theta}"
                ) from None
            if not math.isfinite(total):
                raise DivergedSeriesError(
                    f"series for {self.name} diverged at theta={theta}"
                )
            if self.degree is None:
                if abs(term) < SERIES_RTOL * max(abs(total), 1.0):
                    calm += 1
                    if calm >= _SERIES_CALM_TERMS:
                        return total
                else:
                    calm = 0
        if self.degree is not None:
            return total
        raise DivergedSeriesError(
            f"series for {self.name} did not converge within "
            f"{SERIES_MAX_TERMS} terms at theta={theta}"
        )

    def g(self, theta: float) -> float:
        return self.series(theta, 0)

    def log_g(self, theta: float) -> float:
        value = self.series(theta, 0)
        if value <= 0:
            raise ValueError(f"g({theta}) = {value} is not positive")
        return math.log(value)


@dataclass(frozen=True)
class NnpsLaw(CountingLaw):
    """Counting law p_k = a_k theta^k / g(theta) for a canonical NNPS family."""

    family: NnpsFamily
    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.theta >= self.family.radius_hint:
            raise ValueError(
                f"theta={self.theta} outside radius hint {self.family.radius_hint}"
            )
        self.family.g(self.theta)  # raises DivergedSeriesError if inadmissible

    @cached_property
    def _norm(self) -> float:
        return self.family.g(self.theta)

    @cached_property
    def _pmf_table(self) -> np.ndarray:
        probs = []
        total = 0.0
        k = 0
        kmax = self.family.degree
        while True:
            p = self.family.coef(k) * self.theta**k / self._norm
            probs.append(p)
            total += p
            if kmax is not None and k >= kmax:
                break
            if kmax is None and total >= 1.0 - 1e-13 and k > 0:
                break
            k += 1
            if k > SERIES_MAX_TERMS:
                raise DivergedSeriesError(
                    f"pmf table for {self.family.name} exceeded {SERIES_MAX_TERMS} terms"
                )
        return np.asarray(probs)

    @cached_property
    def _cdf_table(self) -> np.ndarray:
        c = np.cumsum(self._pmf_table)
        c[-1] = max(c[-1], 1.0)
        return c

    def pgf(self, t):
        t = _check_t(t)
        vals = np.array(
            [self.family.g(self.theta * ti) for ti in np.atleast_1d(t)]
        ) / self._norm
        return vals.reshape(np.shape(t)) if np.ndim(t) else float(vals[0])

    def pmf(self, k):
        k = np.asarray(k)
        table = self._pmf_table
        out = np.where(k < table.size, table[np.minimum(k, table.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def moments(self):
        g0 = self._norm
        m1 = self.family.series(self.theta, 1) / g0
        m2 = self.family.series(self.theta, 2) / g0  # E K(K-1)
        return (m1, m2 + m1 - m1**2)

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))

    def ppf(self, u):
        idx = np.searchsorted(self._cdf_table, np.asarray(u), side="left")
        return idx.astype(np.int64)

    def support_bound(self, tail: float = 1e-12) -> int:
        return self._pmf_table.size - 1


def pt_from_moments(c: float, delta2: float, rel_tol: float = 1e-9) -> CountingLaw:
    """Build the PT law with mean c and variance delta2.

    The moment pair picks the family: delta2 == c gives Poisson, delta2 < c
    binomial (requiring integer n = c^2/(c - delta2)), delta2 > c negative
    binomial.  Infeasible combinations are rejected.
    """
    if not c > 0:
        raise ValueError("mean must be positive")
    if not delta2 > 0:
        raise ValueError("variance must be positive")
    if math.isclose(delta2, c, rel_tol=rel_tol):
        return Poisson(c)
    if delta2 < c:
        n = c * c / (c - delta2)
        n_int = round(n)
        if n_int < 1 or abs(n - n_int) > rel_tol * n:
            raise ValueError(
                f"no binomial law has mean {c} and variance {delta2} "
                f"(implied n = {n} is not a positive integer)"
            )
        return Binomial(int(n_int), 1.0 - delta2 / c)
    theta = (delta2 - c) / delta2
    return NegativeBinomial(c * c / (delta2 - c), theta)
