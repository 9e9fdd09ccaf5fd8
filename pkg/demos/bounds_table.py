"""
Lambert-W bounds on reverse and chained Gaussian KL
===================================================

Closed-form limits on how far ``KL(N2||N1)`` can drift from ``KL(N1||N2)``,
and on ``KL(N1||N3)`` along a two-step chain.
"""

# %%
import numpy as np

from klods.lambertw import lambert_w0, lambert_wm1, relaxed_triangle_bound, reverse_kl_lower_bound, reverse_kl_upper_bound

# %% [markdown]
# Both real branches meet at ``x = -1/e`` where ``W = -1``.

# %%
x = -np.exp(-2.0)
print(f"W0({x:.6f}) = {lambert_w0(x):.6f}   W-1({x:.6f}) = {lambert_wm1(x):.6f}")

# %% [markdown]
# Supremum of the reverse KL given a forward KL of at most eps.
# For eps = 0.1 the formula gives 0.1603.

# %%
print(f"{'eps':>7} {'sup KL(N2||N1)':>16}")
for eps in (0.001, 0.005, 0.01, 0.05, 0.1, 0.5):
    print(f"{eps:7.3f} {reverse_kl_upper_bound(eps):16.6f}")

# %% [markdown]
# Infimum of the reverse KL given a forward KL of at least M.

# %%
for m in (0.5, 1.0, 2.0, 5.0):
    print(f"M = {m:4.1f}   inf KL(N2||N1) = {reverse_kl_lower_bound(m):.6f}")

# %% [markdown]
# The relaxed triangle inequality: small steps keep the end points close.

# %%
for eps in (0.01, 0.05, 0.1):
    print(f"eps1 = eps2 = {eps:4.2f}   KL(N1||N3) < {relaxed_triangle_bound(eps, eps):.6f}")
