"""KL-divergence based OOD detectors for batches (GAD) and single points (PAD).

A batch of ``m`` representations is normalized against the model prior,
each row is cut into ``k`` subvectors of length ``l``, and one Gaussian is
fitted to the ``m*k`` pooled subvectors. The score is the KL divergence of
that fit from ``N(0, I_l)``; the batch is flagged OOD when the score is
strictly greater than the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from klods.decomposition import SplitConfig, pooled_subvectors
from klods.errors import DimensionMismatchError, InsufficientSamplesError, KlodsError
from klods.gaussian import (
    PriorSpec,
    as_matrix,
    criterion_standard,
    estimate_gaussian,
    normalize_against_prior,
    offdiag_correlation_stats,
)

CRITERIA = ("klods", "klod", "correlation_std")
_ALIASES = {"corr-std": "correlation_std", "corr_std": "correlation_std", "correlation-std": "correlation_std"}


@dataclass(frozen=True)
class DetectorConfig:
    """Detector settings.

    ``criterion='klod'`` ignores ``split`` and fits whole vectors. A
    ``klods`` detector with ``split.strategy == 'none'`` reduces to KLOD.
    When ``split`` is ``s1``/``s2`` without its own ``tensor_shape``, the
    prior's shape is used.
    """

    prior: PriorSpec
    split: SplitConfig = SplitConfig("none")
    ridge: float = 0.0
    threshold: Optional[float] = None
    criterion: str = "klods"

    def __post_init__(self):
        crit = _ALIASES.get(self.criterion.lower(), self.criterion.lower())
        if crit not in CRITERIA:
            raise KlodsError(f"unknown criterion {self.criterion!r}; expected one of {CRITERIA}")
        object.__setattr__(self, "criterion", crit)
        if self.ridge < 0:
            raise KlodsError("ridge must be nonnegative")
        split = self.split
        if crit == "klod":
            split = SplitConfig("none")
        elif split.strategy in ("s1", "s2") and split.tensor_shape is None:
            split = SplitConfig(split.strategy, split.k, self.prior.tensor_shape)
        object.__setattr__(self, "split", split)
        split.groups(self.prior.dim)


@dataclass(frozen=True)
class GroupVerdict:
    score: float
    is_ood: Optional[bool] = None
    warnings: Tuple[str, ...] = ()


def _pooled(batch, config: DetectorConfig):
    x = as_matrix(batch)
    if x.shape[1] != config.prior.dim:
        raise DimensionMismatchError(f"batch dim {x.shape[1]} != prior dim {config.prior.dim}")
    z = normalize_against_prior(x, config.prior)
    return pooled_subvectors(z, config.split)


def _verdict(score: float, config: DetectorConfig, warnings=()) -> GroupVerdict:
    is_ood = None if config.threshold is None else bool(score > config.threshold)
    return GroupVerdict(float(score), is_ood, tuple(warnings))


def score_group(batch, config: DetectorConfig) -> GroupVerdict:
    """Score a batch of ``m >= 1`` representations.

    Raises
    ------
    InsufficientSamplesError
        Fewer than two pooled samples (for KLOD, ``m < 2``).
    """
    if config.criterion == "correlation_std":
        return _verdict(score_group_correlation_std(batch, config), config)
    pooled = _pooled(batch, config)
    count, length = pooled.shape
    if count < 2:
        raise InsufficientSamplesError(
            f"pooled sample count {count} < 2 (criterion {config.criterion}, split {config.split})"
        )
    warnings = []
    if count <= length:
        warnings.append(
            f"pooled sample count {count} <= subvector length {length}: "
            "sample covariance is singular and regularization sets the score"
        )
    score = criterion_standard(estimate_gaussian(pooled, config.ridge))
    return _verdict(score, config, warnings)


def score_point(z, config: DetectorConfig) -> GroupVerdict:
    """Point-wise detection: :func:`score_group` on a single representation."""
    row = np.asarray(z, dtype=np.float64).reshape(1, -1)
    return score_group(row, config)


def score_group_correlation_std(batch, config: DetectorConfig) -> float:
    """Population std of the off-diagonal correlations of the pooled subvectors."""
    pooled = _pooled(batch, config)
    if pooled.shape[0] < 3:
        raise InsufficientSamplesError(f"pooled sample count {pooled.shape[0]} < 3")
    return offdiag_correlation_stats(pooled).std
