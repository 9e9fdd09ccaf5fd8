import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from klods.errors import DomainError
from klods.gaussian import GaussianParams, kl_gaussians
from klods.lambertw import (
    BRANCH_POINT,
    evaluate_bound,
    lambert_w0,
    lambert_wm1,
    relaxed_triangle_bound,
    reverse_kl_lower_bound,
    reverse_kl_upper_bound,
)
from oracles import bisection_w0, bisection_wm1, oracle_reverse_sup, pair_at


def _residual_ok(w, x):
    return abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


# ---------------------------------------------------------------- W values


def test_w0_fixed_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
    assert lambert_w0(BRANCH_POINT) == -1.0


def test_w0_at_minus_e_squared_matches_bisection():
    x = -math.exp(-2)
    assert lambert_w0(x) == pytest.approx(bisection_w0(x), abs=1e-14)
    assert lambert_w0(x) == pytest.approx(-0.158594, abs=5e-7)


def test_wm1_branch_point_is_exactly_minus_one():
    assert lambert_wm1(-math.exp(-1)) == -1.0


def test_wm1_at_minus_e_squared_matches_bisection():
    x = -math.exp(-2)
    assert lambert_wm1(x) == pytest.approx(bisection_wm1(x), abs=1e-13)
    assert lambert_wm1(x) == pytest.approx(-3.146193, abs=5e-7)


def test_defining_equation_on_grids():
    grid0 = np.concatenate([
        BRANCH_POINT + np.logspace(-16, -1, 300),
        np.linspace(-0.3, 10, 400),
        np.logspace(1, 300, 300),
    ])
    w0 = lambert_w0(grid0)
    assert all(_residual_ok(w, x) for w, x in zip(w0, grid0))
    gridm1 = np.concatenate([
        BRANCH_POINT + np.logspace(-16, -1, 400),
        -np.logspace(-300, -0.6, 600),
    ])
    wm1 = lambert_wm1(gridm1)
    assert all(_residual_ok(w, x) for w, x in zip(wm1, gridm1))


def _tol(w):
    # near the branch point dW/dx = 1 / (e^w (1 + w)) blows up, so a one-ulp
    # residual moves w by 1e-16 / |e^w (1 + w)|
    return 1e-13 * abs(w) + 1e-15 / abs(math.exp(w) * (1 + w))


def test_agrees_with_mpmath(rng):
    mpmath.mp.dps = 40
    for x in np.concatenate([BRANCH_POINT + np.logspace(-12, -0.5, 20), rng.uniform(-0.36, 50, 30)]):
        ref = float(mpmath.lambertw(mpmath.mpf(x), 0).real)
        assert abs(lambert_w0(x) - ref) <= _tol(ref)
    for x in np.concatenate([BRANCH_POINT + np.logspace(-12, -0.5, 20), -np.logspace(-200, -1, 30)]):
        ref = float(mpmath.lambertw(mpmath.mpf(x), -1).real)
        assert abs(lambert_wm1(x) - ref) <= _tol(ref)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=BRANCH_POINT, max_value=-1e-300))
def test_branch_ordering(x):
    assert lambert_w0(x) >= -1.0 >= lambert_wm1(x)


def test_domain_errors():
    with pytest.raises(DomainError):
        lambert_w0(-0.5)
    with pytest.raises(DomainError):
        lambert_wm1(0.0)
    with pytest.raises(DomainError):
        lambert_wm1(0.1)


def test_array_shape_preserved():
    x = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert lambert_w0(x).shape == (2, 2)


# ---------------------------------------------------------------- bound values


@pytest.mark.parametrize("eps,printed", [(0.001, 0.001), (0.005, 0.006), (0.01, 0.011), (0.05, 0.069), (0.5, 1.732)])
def test_upper_bound_table_values(eps, printed):
    assert reverse_kl_upper_bound(eps) == pytest.approx(printed, abs=1e-3)


def test_upper_bound_at_point_one_matches_oracle():
    assert reverse_kl_upper_bound(0.1) == pytest.approx(oracle_reverse_sup(0.1), rel=1e-10)
    assert reverse_kl_upper_bound(0.1) == pytest.approx(0.160326, abs=1e-6)


def test_bounds_vanish_at_the_branch_point():
    assert reverse_kl_upper_bound(1e-9) < 1e-6
    assert reverse_kl_lower_bound(1e-9) < 1e-6
    assert relaxed_triangle_bound(1e-9, 1e-9) < 1e-5


def test_lower_bound_half():
    w = bisection_wm1(-math.exp(-2))
    expected = 0.5 * (-1 / w - math.log(-1 / w) - 1)
    assert reverse_kl_lower_bound(0.5) == pytest.approx(expected, rel=1e-10)
    assert reverse_kl_lower_bound(0.5) == pytest.approx(0.232, abs=5e-4)


def test_monotonicity():
    assert reverse_kl_lower_bound(0.1) < reverse_kl_lower_bound(0.5) < reverse_kl_lower_bound(2.0)
    assert relaxed_triangle_bound(0.01, 0.01) < relaxed_triangle_bound(0.05, 0.05)
    grid = np.logspace(-6, 1, 50)
    ups = [reverse_kl_upper_bound(e) for e in grid]
    assert all(a < b for a, b in zip(ups, ups[1:]))


def test_triangle_bound_matches_mpmath_small_eps():
    mpmath.mp.dps = 50
    for e1, e2 in [(1e-9, 1e-9), (1e-6, 3e-4), (0.01, 0.05), (0.3, 1.0)]:
        x1 = -mpmath.exp(-(1 + 2 * mpmath.mpf(e1)))
        x2 = -mpmath.exp(-(1 + 2 * mpmath.mpf(e2)))
        a = mpmath.lambertw(x1, -1).real
        b = mpmath.lambertw(x2, -1).real
        c = mpmath.lambertw(x2, 0).real
        ref = e1 + e2 + 0.5 * (a * b + a + b + 1 - b * (mpmath.sqrt(2 * e1) + mpmath.sqrt(2 * e2 / -c)) ** 2)
        assert relaxed_triangle_bound(e1, e2) == pytest.approx(float(ref), rel=1e-7)


def test_bound_domain_errors():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(DomainError):
            reverse_kl_upper_bound(bad)
    with pytest.raises(DomainError):
        relaxed_triangle_bound(0.1, 0.0)


def test_evaluate_bound_reports():
    r2 = evaluate_bound(2, eps=0.05)
    assert r2.bound == reverse_kl_upper_bound(0.05)
    assert r2.to_dict()["theorem"] == 2
    assert evaluate_bound(3, m=0.5).bound == reverse_kl_lower_bound(0.5)
    r4 = evaluate_bound(4, eps=0.01, eps2=0.02)
    assert r4.bound == relaxed_triangle_bound(0.01, 0.02)
    assert set(r4.branch_values) == {"W-1(eps1)", "W-1(eps2)", "W0(eps2)"}
    with pytest.raises(DomainError):
        evaluate_bound(4, eps=0.01)
    with pytest.raises(DomainError):
        evaluate_bound(5, eps=0.01)


# ---------------------------------------------------------------- dominance (small samples)


def _g(pair):
    return GaussianParams(*pair)


@pytest.mark.parametrize("eps", [0.01, 0.1])
def test_reverse_upper_dominance_sample(rng, eps):
    bound = reverse_kl_upper_bound(eps)
    for _ in range(100):
        n1, n2 = pair_at(rng, int(rng.integers(1, 17)), eps)
        assert kl_gaussians(_g(n1), _g(n2)) == pytest.approx(eps, rel=1e-8)
        assert kl_gaussians(_g(n2), _g(n1)) <= bound + 1e-9


def test_upper_bound_is_nearly_attained_in_one_dimension():
    # variance-only 1-D pairs approach the supremum from below
    eps = 0.05
    best = 0.0
    for v in np.linspace(0.2, 3.0, 2000):
        f = 0.5 * (v - 1 - math.log(v))
        if f <= eps:
            best = max(best, 0.5 * (1 / v - 1 + math.log(v)))
    assert best <= reverse_kl_upper_bound(eps) + 1e-12
    assert best == pytest.approx(reverse_kl_upper_bound(eps), rel=1e-2)
