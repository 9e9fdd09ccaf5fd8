"""Dimension splits and Gaussian closed forms of the KL decompositions.

For ``Z ~ N(mu, S)`` in ``n`` dimensions, split into ``k`` groups of
length ``l``::

    KL(Z || N(0, I_n)) = I_d + D_d          (total correlation + dimension-wise KL)
                       = I_g + D_g          (between-group MI + group-wise KL)
                 D_g   = I_l + D_d          (within-group MI + dimension-wise KL)
                 I_d   = I_g + I_l
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from klods.errors import InsufficientSamplesError, InvalidSplitError
from klods.gaussian import (
    GaussianParams,
    as_matrix,
    cholesky_factor,
    criterion_standard,
    estimate_gaussian,
)

STRATEGIES = ("none", "s1", "s2", "contiguous")


@dataclass(frozen=True)
class SplitConfig:
    """How a ``d``-dimensional representation is cut into ``k`` subvectors.

    ``s1``
        one group per pixel ``(h, w)`` holding its ``C`` channel values
        (``H*W`` groups of length ``C``).
    ``s2``
        one group per channel ``c`` holding its ``H*W`` pixel values in
        row-major ``(h, w)`` order (``C`` groups of length ``H*W``).
    ``contiguous``
        ``k`` consecutive blocks of length ``d // k``.
    ``none``
        a single group covering every dimension.

    ``s1`` and ``s2`` need ``tensor_shape = (H, W, C)`` describing a
    C-order flattening.
    """

    strategy: str = "none"
    k: Optional[int] = None
    tensor_shape: Optional[Tuple[int, int, int]] = None

    def __post_init__(self):
        strategy = str(self.strategy).lower()
        if strategy not in STRATEGIES:
            raise InvalidSplitError(f"unknown split strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", strategy)
        if strategy == "contiguous":
            if self.k is None or int(self.k) < 1:
                raise InvalidSplitError("contiguous split needs k >= 1")
            object.__setattr__(self, "k", int(self.k))
        if strategy in ("s1", "s2"):
            if self.tensor_shape is None or len(self.tensor_shape) != 3:
                raise InvalidSplitError(f"{strategy} split needs tensor_shape (H, W, C)")
        if self.tensor_shape is not None:
            object.__setattr__(self, "tensor_shape", tuple(int(s) for s in self.tensor_shape))

    @classmethod
    def parse(cls, text: str, tensor_shape=None) -> "SplitConfig":
        """Parse ``none``, ``s1``, ``s2`` or ``contiguous:K``."""
        text = text.strip().lower()
        if text.startswith("contiguous"):
            _, _, k = text.partition(":")
            if not k.isdigit():
                raise InvalidSplitError(f"expected contiguous:K, got {text!r}")
            return cls("contiguous", int(k), tensor_shape)
        return cls(text, None, tensor_shape)

    def __str__(self):
        return f"contiguous:{self.k}" if self.strategy == "contiguous" else self.strategy

    def groups(self, dim: int) -> NDArray:
        """Index map as a ``(k, l)`` integer array; row ``i`` lists group ``i``'s flat indices."""
        if self.tensor_shape is not None and int(np.prod(self.tensor_shape)) != dim:
            raise InvalidSplitError(f"tensor_shape {self.tensor_shape} does not match dim {dim}")
        flat = np.arange(dim)
        if self.strategy == "none":
            return flat[None, :]
        if self.strategy == "contiguous":
            if dim % self.k:
                raise InvalidSplitError(f"dim {dim} is not divisible by k={self.k}")
            return flat.reshape(self.k, dim // self.k)
        h, w, c = self.tensor_shape
        cube = flat.reshape(h, w, c)
        if self.strategy == "s1":
            return cube.reshape(h * w, c)
        return cube.reshape(h * w, c).T.copy()

    def shape(self, dim: int) -> Tuple[int, int]:
        """``(k, l)`` for a representation of dimension ``dim``."""
        return self.groups(dim).shape


def pooled_subvectors(samples, split: SplitConfig) -> NDArray:
    """Stack every row's ``k`` subvectors into an ``(N*k, l)`` matrix.

    Rows are ordered sample-major: the ``k`` subvectors of sample 0, then
    those of sample 1, and so on.
    """
    x = as_matrix(samples)
    idx = split.groups(x.shape[1])
    return x[:, idx].reshape(-1, idx.shape[1])


@dataclass(frozen=True)
class DecompositionResult:
    kl_total: float
    total_correlation: float
    dimwise_kl: float
    group_mi: float
    intra_group_mi: float
    groupwise_kl: float
    per_dim_kl: NDArray = field(repr=False)
    per_group_kl: NDArray = field(repr=False)

    def identity_residuals(self) -> dict:
        """Absolute residuals of the four decomposition identities."""
        return {
            "kl=I_d+D_d": abs(self.kl_total - (self.total_correlation + self.dimwise_kl)),
            "kl=I_g+D_g": abs(self.kl_total - (self.group_mi + self.groupwise_kl)),
            "D_g=I_l+D_d": abs(self.groupwise_kl - (self.intra_group_mi + self.dimwise_kl)),
            "I_d=I_g+I_l": abs(self.total_correlation - (self.group_mi + self.intra_group_mi)),
        }


def decompose_gaussian(params: GaussianParams, split: SplitConfig) -> DecompositionResult:
    """Split ``KL(params || N(0, I))`` into correlation and marginal parts.

    Every component is computed from its own closed form (log-determinants
    of the full covariance, of its diagonal blocks and of its diagonal), so
    the four identities are genuine checks rather than definitions.
    Group marginals use principal submatrices of the covariance.
    """
    groups = split.groups(params.dim)
    mu = params.mean
    cov = params.cov
    logdet = cholesky_factor(cov).logdet
    var = np.diag(cov)
    if np.any(var <= 0):
        raise InvalidSplitError("covariance has a nonpositive diagonal entry")
    log_var = np.log(var)

    per_dim = 0.5 * (var + mu**2 - 1.0 - log_var)
    block_logdets = np.empty(len(groups))
    per_group = np.empty(len(groups))
    for i, idx in enumerate(groups):
        block = GaussianParams(mu[idx], cov[np.ix_(idx, idx)])
        block_logdets[i] = cholesky_factor(block.cov).logdet
        per_group[i] = criterion_standard(block)

    total_corr = 0.5 * (np.sum(log_var) - logdet)
    group_mi = 0.5 * (np.sum(block_logdets) - logdet)
    intra_mi = 0.5 * (np.sum(log_var) - np.sum(block_logdets))
    return DecompositionResult(
        kl_total=criterion_standard(params),
        total_correlation=float(total_corr),
        dimwise_kl=float(np.sum(per_dim)),
        group_mi=float(group_mi),
        intra_group_mi=float(intra_mi),
        groupwise_kl=float(np.sum(per_group)),
        per_dim_kl=per_dim,
        per_group_kl=per_group,
    )


def estimate_dg_pooled(
    samples,
    split: SplitConfig,
    ridge: float = 0.0,
    with_k_multiplier: bool = False,
) -> float:
    """Group-wise KL estimated from one Gaussian fitted to all pooled subvectors.

    Each of the ``m`` rows contributes its ``k`` subvectors as separate
    samples. The result is ``KL(N_fit || N(0, I_l))``, multiplied by ``k``
    when ``with_k_multiplier`` is set.
    """
    pooled = pooled_subvectors(samples, split)
    if pooled.shape[0] < 2:
        raise InsufficientSamplesError(
            f"pooled sample count {pooled.shape[0]} < 2; use a larger batch or a finer split"
        )
    value = criterion_standard(estimate_gaussian(pooled, ridge))
    if with_k_multiplier:
        value *= split.shape(as_matrix(samples).shape[1])[0]
    return value
