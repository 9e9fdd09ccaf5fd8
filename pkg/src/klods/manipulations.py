"""Likelihood-manipulation attacks.

``rescale_to_typical_set`` (M1) moves latents onto the prior's typical
shell, radius ``sqrt(d)`` in normalized coordinates, keeping their
direction. ``adjust_contrast`` (M2) scales pixel deviations from the
image mean by a factor ``k``.
"""

from __future__ import annotations

import numpy as np

from klods.errors import DegenerateDataError, DimensionMismatchError, DomainError
from klods.gaussian import PriorSpec, RepresentationSet


def rescale_to_typical_set(z, prior: PriorSpec):
    """Rescale each representation to normalized norm ``sqrt(d)``.

    Parameters
    ----------
    z : array_like, shape (d,) or (N, d), or RepresentationSet
    prior : PriorSpec

    Returns
    -------
    Same kind and shape as ``z``.
    """
    is_set = isinstance(z, RepresentationSet)
    x = z.data if is_set else np.asarray(z, dtype=np.float64)
    single = x.ndim == 1
    rows = np.atleast_2d(x)
    if rows.shape[1] != prior.dim:
        raise DimensionMismatchError(f"representation dim {rows.shape[1]} != prior dim {prior.dim}")
    u = (rows - prior.mean) / prior.scale
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateDataError("cannot rescale a representation equal to the prior mean")
    u = np.sqrt(prior.dim) * (u / norms)
    out = u * prior.scale + prior.mean
    if is_set:
        return RepresentationSet(out, z.tensor_shape)
    return out[0] if single else out


def adjust_contrast(image, k: float):
    """Contrast mutation ``clip(p + k (x - p), 0, 1)`` around the image mean ``p``.

    ``image`` is one ``(H, W, C)`` tensor or a batch ``(N, H, W, C)``; the
    pivot is computed per image over all pixels and channels.
    """
    if k < 0:
        raise DomainError(f"contrast factor must be nonnegative (got {k})")
    x = np.asarray(image, dtype=np.float64)
    if x.ndim not in (3, 4):
        raise DimensionMismatchError(f"expected (H, W, C) or (N, H, W, C), got shape {x.shape}")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise DomainError("image values must lie in [0, 1]; convert byte images with x / 255")
    axes = (-3, -2, -1)
    pivot = x.mean(axis=axes, keepdims=True)
    return np.clip(pivot + k * (x - pivot), 0.0, 1.0)
