"""
Are latents Gaussian? Generalized Shapiro-Wilk
==============================================
"""

# %%
import numpy as np

from klods import generalized_sw_multivariate, moment_matched

rng = np.random.default_rng(7)
cov = np.array([[1.0, 0.6, 0.0], [0.6, 2.0, 0.3], [0.0, 0.3, 0.5]])

# %%
gauss = rng.multivariate_normal(np.zeros(3), cov, size=300)
laplace = moment_matched("laplace", np.zeros(3), cov).sample(300, rng)
uniform = moment_matched("uniform", np.zeros(3), cov).sample(300, rng)

for name, x in (("gaussian", gauss), ("laplace", laplace), ("uniform", uniform)):
    r = generalized_sw_multivariate(x, n_null_sims=1000, seed=0)
    print(f"{name:>8}  W* = {r.statistic:.4f}  p = {r.p_value:.3f}")
