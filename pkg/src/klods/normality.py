"""Shapiro-Wilk normality tests, univariate and generalized multivariate.

The multivariate statistic ``W*`` standardizes the sample with its mean
and the inverse Cholesky factor of its unbiased covariance, then averages
the univariate ``W`` over coordinates. Its p-value comes from a seeded
Monte-Carlo simulation of ``W*`` under ``N(0, I_d)`` at the same
``(N, d)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from klods.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    InsufficientSamplesError,
    NotPositiveDefiniteError,
)
from klods.gaussian import RepresentationSet, as_matrix

MIN_N = 3
MAX_N = 5000
DEFAULT_NULL_SIMS = 2000
DEFAULT_CAP = 2000


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    p_value: float
    n: int
    d: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def _check_n(n: int):
    if not MIN_N <= n <= MAX_N:
        raise InsufficientSamplesError(f"sample size must be in [{MIN_N}, {MAX_N}], got {n}")


def _w(sample: np.ndarray) -> tuple:
    res = stats.shapiro(sample)
    return min(float(res.statistic), 1.0), float(np.clip(res.pvalue, 0.0, 1.0))


def shapiro_wilk_univariate(sample) -> NormalityResult:
    """Shapiro-Wilk ``W`` and p-value (Royston's AS R94 approximation)."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    _check_n(x.size)
    if np.ptp(x) == 0:
        raise DegenerateDataError("all sample values are equal")
    # W is location-scale invariant; mapping onto [0, 1] sidesteps the
    # absolute range threshold inside swilk
    y = x / np.max(np.abs(x))
    y = (y - y.min()) / np.ptp(y)
    w, p = _w(y)
    return NormalityResult(w, p, x.size, 1)


def _standardize(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    try:
        lower = cholesky(cov, lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError("sample covariance is singular") from exc
    return solve_triangular(lower, centered.T, lower=True).T


def _w_star(x: np.ndarray) -> float:
    y = _standardize(x)
    return float(np.mean([_w(y[:, j])[0] for j in range(y.shape[1])]))


@lru_cache(maxsize=32)
def _null_w_star(n: int, d: int, n_sims: int, seed: int) -> np.ndarray:
    children = np.random.SeedSequence(seed).spawn(n_sims)
    return np.array([_w_star(np.random.default_rng(c).standard_normal((n, d))) for c in children])


def generalized_sw_multivariate(samples, n_null_sims: int = DEFAULT_NULL_SIMS, seed: int = 0) -> NormalityResult:
    """Generalized Shapiro-Wilk test for multivariate normality.

    Parameters
    ----------
    samples : array_like, shape (N, d), or RepresentationSet
        Requires ``N > d + 1`` and ``3 <= N <= 5000``.
    n_null_sims : int
        Number of null datasets simulated for the p-value.
    seed : int
        Master seed; the null simulation for a given ``(N, d, n_null_sims,
        seed)`` is computed once and cached.

    Returns
    -------
    NormalityResult
        ``p_value`` is the fraction of null ``W*`` values strictly below the
        observed one.
    """
    x = as_matrix(samples)
    n, d = x.shape
    _check_n(n)
    if n <= d + 1:
        raise InsufficientSamplesError(f"need N > d + 1 (N={n}, d={d})")
    if n_null_sims < 1:
        raise DimensionMismatchError("n_null_sims must be positive")
    if np.any(np.ptp(x, axis=0) == 0):
        raise NotPositiveDefiniteError("a column is constant; sample covariance is singular")
    observed = _w_star(x)
    null = _null_w_star(n, d, int(n_null_sims), int(seed))
    p = float(np.mean(null < observed))
    return NormalityResult(observed, p, n, d)


def subsample_for_test(samples, cap: int = DEFAULT_CAP, seed: int = 0) -> RepresentationSet:
    """Uniform subsample of ``min(N, cap)`` distinct rows, kept in original order."""
    if cap < MIN_N:
        raise InsufficientSamplesError(f"cap must be >= {MIN_N}")
    shape = samples.tensor_shape if isinstance(samples, RepresentationSet) else None
    x = as_matrix(samples)
    if x.shape[0] <= cap:
        return RepresentationSet(x, shape)
    rows = np.sort(np.random.default_rng(seed).choice(x.shape[0], size=cap, replace=False))
    return RepresentationSet(x[rows], shape)
