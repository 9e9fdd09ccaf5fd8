"""Real Lambert W (branches 0 and -1) and dimension-free KL bounds for Gaussians.

The bounds relate forward and reverse KL divergences between two
Gaussians of any dimension:

* :func:`reverse_kl_upper_bound` -- if ``KL(N1||N2) <= eps`` then
  ``KL(N2||N1)`` is at most this value.
* :func:`reverse_kl_lower_bound` -- if ``KL(N1||N2) >= M`` then
  ``KL(N2||N1)`` is at least this value.
* :func:`relaxed_triangle_bound` -- if ``KL(N1||N2) <= eps1`` and
  ``KL(N2||N3) <= eps2`` then ``KL(N1||N3)`` is below this value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from klods.errors import DomainError

BRANCH_POINT = -math.exp(-1.0)
_BOUNDARY_SLACK = 1e-15
_MAX_ITER = 50


def _halley(x: float, w: float) -> float:
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0 or not math.isfinite(denom):
            break
        step = f / denom
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def _branch_series(x: float, sign: float) -> float:
    # expansion about the branch point in p = sqrt(2 (e x + 1))
    p = sign * math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3


def _w0_scalar(x: float) -> float:
    x = float(x)
    if math.isnan(x):
        return math.nan
    if x < BRANCH_POINT - _BOUNDARY_SLACK:
        raise DomainError(f"W0 is undefined for x < -1/e (got {x!r})")
    if x <= BRANCH_POINT:
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if math.e * x + 1.0 < 0.3:
        w = _branch_series(x, 1.0)
    elif abs(x) < 0.3:
        w = x - x * x + 1.5 * x**3
    elif x < 3.0:
        lx = math.log1p(x)
        w = lx * (1.0 - math.log1p(lx) / (2.0 + lx))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    return _halley(x, w)


def _wm1_scalar(x: float) -> float:
    x = float(x)
    if math.isnan(x):
        return math.nan
    if x < BRANCH_POINT - _BOUNDARY_SLACK or x >= 0.0:
        raise DomainError(f"W_-1 is defined on [-1/e, 0) (got {x!r})")
    if x <= BRANCH_POINT:
        return -1.0
    if math.e * x + 1.0 < 0.3:
        w = _branch_series(x, -1.0)
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    return _halley(x, w)


def _apply(func, x):
    if np.ndim(x) == 0:
        return func(x)
    arr = np.asarray(x, dtype=np.float64)
    return np.array([func(v) for v in arr.ravel()]).reshape(arr.shape)


def lambert_w0(x):
    """Principal branch ``W0(x) >= -1`` for real ``x >= -1/e``.

    Accepts a scalar or an array. Evaluated by Halley iteration from a
    branch-point, Taylor or asymptotic starting guess.
    """
    return _apply(_w0_scalar, x)


def lambert_wm1(x):
    """Lower branch ``W_-1(x) <= -1`` for ``-1/e <= x < 0``."""
    return _apply(_wm1_scalar, x)


def _gap(w: float) -> float:
    # 0.5 * (1/a - log(1/a) - 1) with a = -w, written in u = 1 + w
    u = w + 1.0
    return 0.5 * (u / (1.0 - u) + math.log1p(-u))


def _shifted(eps: float) -> float:
    return -math.exp(-(1.0 + 2.0 * eps))


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"{name} must be a positive finite real (got {value!r})")
    return value


def reverse_kl_upper_bound(epsilon: float) -> float:
    """Supremum of ``KL(N2||N1)`` over Gaussian pairs with ``KL(N1||N2) <= epsilon``."""
    eps = _positive("epsilon", epsilon)
    return max(_gap(_w0_scalar(_shifted(eps))), 0.0)


def reverse_kl_lower_bound(M: float) -> float:
    """Infimum of ``KL(N2||N1)`` over Gaussian pairs with ``KL(N1||N2) >= M``."""
    m = _positive("M", M)
    return max(_gap(_wm1_scalar(_shifted(m))), 0.0)


def relaxed_triangle_bound(eps1: float, eps2: float) -> float:
    """Upper bound on ``KL(N1||N3)`` given ``KL(N1||N2) <= eps1`` and ``KL(N2||N3) <= eps2``."""
    e1 = _positive("eps1", eps1)
    e2 = _positive("eps2", eps2)
    a = _wm1_scalar(_shifted(e1))
    b = _wm1_scalar(_shifted(e2))
    c = _w0_scalar(_shifted(e2))
    spread = (math.sqrt(2.0 * e1) + math.sqrt(2.0 * e2 / -c)) ** 2
    # (a + 1)(b + 1) is the expanded a*b + a + b + 1
    value = e1 + e2 + 0.5 * ((a + 1.0) * (b + 1.0) - b * spread)
    return max(value, 0.0)


@dataclass(frozen=True)
class BoundReport:
    theorem: int
    inputs: Dict[str, float]
    bound: float
    branch_values: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "inputs": dict(self.inputs),
            "bound": self.bound,
            "branch_values": dict(self.branch_values),
        }


def evaluate_bound(
    theorem: int,
    eps: Optional[float] = None,
    eps2: Optional[float] = None,
    m: Optional[float] = None,
) -> BoundReport:
    """Evaluate one of the three bounds and record the W values it used.

    ``theorem`` is 2 (reverse-KL supremum, needs ``eps``), 3 (reverse-KL
    infimum, needs ``m``) or 4 (relaxed triangle, needs ``eps`` and ``eps2``).
    """
    if theorem == 2:
        if eps is None:
            raise DomainError("the reverse-KL supremum needs eps")
        w = _w0_scalar(_shifted(_positive("eps", eps)))
        return BoundReport(2, {"eps": eps}, reverse_kl_upper_bound(eps), {"W0(eps)": w})
    if theorem == 3:
        if m is None:
            m = eps
        if m is None:
            raise DomainError("the reverse-KL infimum needs m")
        w = _wm1_scalar(_shifted(_positive("m", m)))
        return BoundReport(3, {"m": m}, reverse_kl_lower_bound(m), {"W-1(m)": w})
    if theorem == 4:
        if eps is None or eps2 is None:
            raise DomainError("the relaxed triangle bound needs eps and eps2")
        e1 = _positive("eps", eps)
        e2 = _positive("eps2", eps2)
        branch = {
            "W-1(eps1)": _wm1_scalar(_shifted(e1)),
            "W-1(eps2)": _wm1_scalar(_shifted(e2)),
            "W0(eps2)": _w0_scalar(_shifted(e2)),
        }
        return BoundReport(4, {"eps1": e1, "eps2": e2}, relaxed_triangle_bound(e1, e2), branch)
    raise DomainError(f"unknown theorem {theorem!r}; expected 2, 3 or 4")
