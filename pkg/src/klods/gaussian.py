"""Multivariate Gaussian estimation and closed-form KL divergences.

All logarithms are natural (nats). Covariance estimates use the maximum
likelihood divisor ``N`` unless ``unbiased=True`` is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from klods.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    DomainError,
    InsufficientSamplesError,
    NotPositiveDefiniteError,
)

# relative default jitter and the number of tenfold escalations tried
DEFAULT_JITTER = 1e-9
JITTER_STEPS = 7


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianParams:
    """Mean vector and full covariance of an ``n``-dimensional Gaussian.

    The covariance is symmetrized as ``(C + C.T) / 2`` on construction.
    """

    mean: NDArray
    cov: NDArray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if mean.ndim != 1:
            raise DimensionMismatchError(f"mean must be a vector, got shape {mean.shape}")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DimensionMismatchError(
                f"covariance shape {cov.shape} does not match mean length {n}"
            )
        scale = np.max(np.abs(cov)) if cov.size else 0.0
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-8 * max(scale, 1.0):
            raise NotPositiveDefiniteError("covariance is not symmetric")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(0.5 * (cov + cov.T)))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def standard(cls, dim: int) -> "GaussianParams":
        return cls(np.zeros(dim), np.eye(dim))


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor with its log-determinant.

    ``jitter`` records the diagonal loading that was needed (0 when the
    matrix factored as given).
    """

    lower: NDArray
    logdet: float
    jitter: float = 0.0


@dataclass(frozen=True)
class PriorSpec:
    """Diagonal Gaussian prior ``N(mean, diag(scale**2))``.

    ``tensor_shape`` optionally records the ``(H, W, C)`` layout of a
    flattened (C-order) latent vector.
    """

    mean: NDArray
    scale: NDArray
    tensor_shape: Optional[Tuple[int, int, int]] = None

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        scale = np.atleast_1d(np.asarray(self.scale, dtype=np.float64))
        if mean.ndim != 1 or mean.shape != scale.shape:
            raise DimensionMismatchError(
                f"prior mean {mean.shape} and scale {scale.shape} must be equal-length vectors"
            )
        if not np.all(scale > 0):
            raise DomainError("prior scale entries must be strictly positive")
        if self.tensor_shape is not None:
            shape = tuple(int(s) for s in self.tensor_shape)
            if len(shape) != 3 or int(np.prod(shape)) != mean.shape[0]:
                raise DimensionMismatchError(
                    f"tensor_shape {shape} incompatible with dim {mean.shape[0]}"
                )
            object.__setattr__(self, "tensor_shape", shape)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "scale", _frozen(scale))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def standard(cls, dim: int, tensor_shape=None) -> "PriorSpec":
        return cls(np.zeros(dim), np.ones(dim), tensor_shape)

    def entropy(self) -> float:
        """Differential entropy in nats."""
        return float(np.sum(0.5 * np.log(2 * np.pi * np.e * self.scale**2)))

    def logpdf(self, z: ArrayLike) -> NDArray:
        u = (np.asarray(z, dtype=np.float64) - self.mean) / self.scale
        return -0.5 * np.sum(u**2, axis=-1) - np.sum(np.log(self.scale)) - 0.5 * self.dim * np.log(2 * np.pi)


@dataclass(frozen=True)
class RepresentationSet:
    """``N x d`` matrix of latent vectors.

    When ``tensor_shape = (H, W, C)`` is set, each row is the C-order
    flattening of an ``(H, W, C)`` tensor.
    """

    data: NDArray
    tensor_shape: Optional[Tuple[int, int, int]] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise DimensionMismatchError(f"expected an N x d matrix, got shape {data.shape}")
        if self.tensor_shape is not None:
            shape = tuple(int(s) for s in self.tensor_shape)
            if len(shape) != 3 or int(np.prod(shape)) != data.shape[1]:
                raise DimensionMismatchError(
                    f"tensor_shape {shape} incompatible with dim {data.shape[1]}"
                )
            object.__setattr__(self, "tensor_shape", shape)
        object.__setattr__(self, "data", _frozen(data))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.n

    def tensors(self) -> NDArray:
        """Rows reshaped to ``(N, H, W, C)``."""
        if self.tensor_shape is None:
            raise DimensionMismatchError("no tensor_shape recorded")
        return self.data.reshape((self.n,) + self.tensor_shape)

    def take(self, rows) -> "RepresentationSet":
        return RepresentationSet(self.data[np.asarray(rows)], self.tensor_shape)


def as_matrix(samples: Union[ArrayLike, RepresentationSet]) -> NDArray:
    """Return ``samples`` as a 2-D float64 array (a vector becomes one row)."""
    if isinstance(samples, RepresentationSet):
        return samples.data
    a = np.asarray(samples, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected an N x d matrix, got shape {a.shape}")
    return a


def cholesky_factor(cov: ArrayLike, ridge: Optional[float] = None) -> CholeskyFactor:
    """Cholesky factorization with escalating diagonal jitter.

    The symmetrized matrix is factored as given first. On failure the
    diagonal is loaded with ``ridge * 10**j`` for ``j = 0..6``, where the
    default ``ridge`` is ``1e-9 * mean(diag(cov))``.

    Raises
    ------
    NotPositiveDefiniteError
        If every escalation step fails.
    """
    c = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    c = 0.5 * (c + c.T)
    if not np.all(np.isfinite(c)):
        raise NotPositiveDefiniteError("covariance contains non-finite entries")
    attempts = [0.0]
    base = ridge
    if base is None or base <= 0:
        mean_diag = float(np.mean(np.diag(c)))
        base = DEFAULT_JITTER * (mean_diag if mean_diag > 0 else 1.0)
    attempts += [base * 10.0**j for j in range(JITTER_STEPS)]
    eye = np.eye(c.shape[0])
    for jitter in attempts:
        try:
            lower = cholesky(c + jitter * eye if jitter else c, lower=True, check_finite=False)
        except LinAlgError:
            continue
        diag = np.diag(lower)
        # numerically singular pivots count as failure so that rank-deficient
        # sample covariances always take the jitter path
        floor = 1e-15 * max(float(np.max(np.diag(c))), 0.0) if not jitter else 0.0
        if np.all(diag > 0) and np.min(diag) ** 2 > floor:
            return CholeskyFactor(lower, float(2.0 * np.sum(np.log(diag))), jitter)
    raise NotPositiveDefiniteError(
        f"covariance is not positive definite after jitter up to {attempts[-1]:.3g}"
    )


def estimate_gaussian(samples, ridge: float = 0.0, unbiased: bool = False) -> GaussianParams:
    """Fit a Gaussian by sample mean and covariance.

    Parameters
    ----------
    samples : array_like, shape (N, n), or RepresentationSet
    ridge : float
        Added to the covariance diagonal.
    unbiased : bool
        Divide by ``N - 1`` instead of the maximum-likelihood ``N``.
    """
    x = as_matrix(samples)
    n_rows = x.shape[0]
    if n_rows < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n_rows}")
    if ridge < 0:
        raise DomainError("ridge must be nonnegative")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n_rows - 1 if unbiased else n_rows)
    if ridge:
        cov = cov + ridge * np.eye(x.shape[1])
    return GaussianParams(mean, cov)


def kl_gaussians(p: GaussianParams, q: GaussianParams) -> float:
    """Closed-form ``KL(p || q)`` between two Gaussians, in nats."""
    if p.dim != q.dim:
        raise DimensionMismatchError(f"dimension mismatch: {p.dim} vs {q.dim}")
    lp = cholesky_factor(p.cov)
    lq = cholesky_factor(q.cov)
    m = solve_triangular(lq.lower, lp.lower, lower=True, check_finite=False)
    diff = solve_triangular(lq.lower, q.mean - p.mean, lower=True, check_finite=False)
    value = 0.5 * (lq.logdet - lp.logdet + np.sum(m * m) + diff @ diff - p.dim)
    return max(float(value), 0.0)


def criterion_standard(params: GaussianParams) -> float:
    """``KL(params || N(0, I))``: half of ``-log|S| + tr(S) + mu.mu - n``."""
    factor = cholesky_factor(params.cov)
    low = factor.lower
    value = 0.5 * (-factor.logdet + np.sum(low * low) + params.mean @ params.mean - params.dim)
    return max(float(value), 0.0)


def normalize_against_prior(samples, prior: PriorSpec) -> RepresentationSet:
    """Map samples to the prior's standardized coordinates ``(z - mean) / scale``."""
    shape = samples.tensor_shape if isinstance(samples, RepresentationSet) else None
    x = as_matrix(samples)
    if x.shape[1] != prior.dim:
        raise DimensionMismatchError(f"sample dim {x.shape[1]} != prior dim {prior.dim}")
    return RepresentationSet((x - prior.mean) / prior.scale, shape or prior.tensor_shape)


def denormalize(samples, prior: PriorSpec) -> RepresentationSet:
    """Inverse of :func:`normalize_against_prior`."""
    shape = samples.tensor_shape if isinstance(samples, RepresentationSet) else None
    x = as_matrix(samples)
    if x.shape[1] != prior.dim:
        raise DimensionMismatchError(f"sample dim {x.shape[1]} != prior dim {prior.dim}")
    return RepresentationSet(x * prior.scale + prior.mean, shape or prior.tensor_shape)


@dataclass(frozen=True)
class CorrelationStats:
    mean: float
    std: float
    values: NDArray = field(repr=False)


def offdiag_correlation_stats(samples) -> CorrelationStats:
    """Upper-triangle Pearson correlations with their mean and population std."""
    x = as_matrix(samples)
    if x.shape[0] < 3:
        raise InsufficientSamplesError(f"need at least 3 samples, got {x.shape[0]}")
    if x.shape[1] < 2:
        raise DimensionMismatchError("need at least 2 columns")
    centered = x - x.mean(axis=0)
    sd = np.sqrt(np.sum(centered**2, axis=0))
    if np.any(sd == 0):
        bad = np.flatnonzero(sd == 0).tolist()
        raise DegenerateDataError(f"zero-variance columns: {bad}")
    u = centered / sd
    corr = np.clip(u.T @ u, -1.0, 1.0)
    values = corr[np.triu_indices(x.shape[1], k=1)]
    return CorrelationStats(float(values.mean()), float(values.std()), values)


__all__: Sequence[str] = [
    "GaussianParams",
    "CholeskyFactor",
    "PriorSpec",
    "RepresentationSet",
    "as_matrix",
    "cholesky_factor",
    "estimate_gaussian",
    "kl_gaussians",
    "criterion_standard",
    "normalize_against_prior",
    "denormalize",
    "CorrelationStats",
    "offdiag_correlation_stats",
]
