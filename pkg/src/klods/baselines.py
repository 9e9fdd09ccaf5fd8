"""Typicality-test baselines: on model NLLs and on prior log-densities of latents."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from klods.errors import DegenerateDataError, DimensionMismatchError, InsufficientSamplesError
from klods.gaussian import PriorSpec, as_matrix


@dataclass(frozen=True)
class NllSet:
    """Per-sample negative log-likelihoods in nats."""

    values: NDArray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise DegenerateDataError("NLL values must be finite")
        object.__setattr__(self, "values", v)


def _values(nll) -> NDArray:
    v = nll.values if isinstance(nll, NllSet) else NllSet(nll).values
    if v.size == 0:
        raise InsufficientSamplesError("empty NLL set")
    return v


def entropy_estimate(train_nll) -> float:
    """Resubstitution entropy estimate: the mean training NLL."""
    return float(np.mean(_values(train_nll)))


def tytest_score(batch_nll, h_hat: float) -> float:
    """``|mean(batch NLL) - h_hat|``."""
    return float(abs(np.mean(_values(batch_nll)) - h_hat))


def latent_typicality_score(batch, prior: PriorSpec) -> float:
    """Typicality of latents under the prior: ``|mean(-log p(z_i)) - H[prior]|``.

    In normalized coordinates ``u = (z - mean) / scale`` this is
    ``|mean(|u_i|^2) - d| / 2``, which is how it is evaluated.
    """
    x = as_matrix(batch)
    if x.shape[1] != prior.dim:
        raise DimensionMismatchError(f"batch dim {x.shape[1]} != prior dim {prior.dim}")
    if x.shape[0] == 0:
        raise InsufficientSamplesError("empty batch")
    u = (x - prior.mean) / prior.scale
    sq = np.einsum("ij,ij->i", u, u)
    return float(abs(np.mean(sq) - prior.dim) / 2.0)
