"""Independent reference implementations used as test oracles.

Nothing here imports klods: each oracle recomputes a quantity from its
definition with a different algorithm (bisection, quadrature, brute-force
enumeration, hand-assembled bytes).
"""

from __future__ import annotations

import math
import struct

import numpy as np
from scipy import integrate, stats
from scipy.linalg import expm


def bisect_root(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisection_w0(x):
    """Principal branch: the root of ``w e^w = x`` on ``[-1, max(1, x)]``."""
    return bisect_root(lambda w: w * math.exp(w) - x, -1.0, max(1.0, x))


def bisection_wm1(x):
    """Lower branch on ``[-1/e, 0)``: the root on ``[-800, -1]``."""
    return bisect_root(lambda w: w * math.exp(w) - x, -800.0, -1.0)


def oracle_reverse_sup(eps):
    a = -bisection_w0(-math.exp(-(1 + 2 * eps)))
    return 0.5 * (1 / a - math.log(1 / a) - 1)


def quad_kl_1d(m1, v1, m2, v2):
    p = stats.norm(m1, math.sqrt(v1))
    q = stats.norm(m2, math.sqrt(v2))
    f = lambda x: math.exp(p.logpdf(x)) * (p.logpdf(x) - q.logpdf(x))
    s = math.sqrt(v1)
    val, _ = integrate.quad(f, m1 - 40 * s, m1 + 40 * s, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def quad_kl_2d(mu1, cov1, mu2, cov2):
    p = stats.multivariate_normal(mu1, cov1)
    q = stats.multivariate_normal(mu2, cov2)
    sd = np.sqrt(np.diag(cov1))
    f = lambda y, x: (lambda lp: math.exp(lp) * (lp - q.logpdf([x, y])))(p.logpdf([x, y]))
    val, _ = integrate.dblquad(
        f,
        mu1[0] - 12 * sd[0], mu1[0] + 12 * sd[0],
        mu1[1] - 12 * sd[1], mu1[1] + 12 * sd[1],
        epsabs=1e-11, epsrel=1e-10,
    )
    return val


def brute_auroc(neg, pos):
    total = 0.0
    for o in pos:
        for i in neg:
            total += 1.0 if o > i else 0.5 if o == i else 0.0
    return total / (len(neg) * len(pos))


def brute_aupr(neg, pos):
    """Rank walk: each positive contributes the precision of the set scoring at least as high."""
    items = [(float(s), 1) for s in pos] + [(float(s), 0) for s in neg]
    precisions = []
    for s, y in items:
        if y != 1:
            continue
        above = [lab for t, lab in items if t >= s]
        precisions.append(sum(above) / len(above))
    return math.fsum(precisions) / len(pos)


def npy_bytes(values, shape, descr="<f8"):
    """Assemble an NPY v1.0 file byte by byte."""
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (descr, shape)
    total = 10 + len(header) + 1
    header = header + " " * ((64 - total % 64) % 64) + "\n"
    fmt = "<%d%s" % (len(values), "d" if descr == "<f8" else "f")
    return (
        b"\x93NUMPY" + b"\x01\x00" + struct.pack("<H", len(header))
        + header.encode("ascii") + struct.pack(fmt, *values)
    )


def royston_w(x):
    """Shapiro-Wilk W from Royston's (1992) polynomial coefficient approximation."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    m = stats.norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mm = m @ m
    u = 1 / math.sqrt(n)
    c = m / math.sqrt(mm)
    an = c[-1] + 0.221157 * u - 0.147981 * u**2 - 2.071190 * u**3 + 4.434685 * u**4 - 2.706056 * u**5
    a = np.empty(n)
    if n > 5:
        an1 = c[-2] + 0.042981 * u - 0.293762 * u**2 - 1.752461 * u**3 + 5.682633 * u**4 - 3.582633 * u**5
        phi = (mm - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an**2 - 2 * an1**2)
        a[:] = m / math.sqrt(phi)
        a[-1], a[-2], a[0], a[1] = an, an1, -an, -an1
    else:
        phi = (mm - 2 * m[-1] ** 2) / (1 - 2 * an**2)
        a[:] = m / math.sqrt(phi)
        a[-1], a[0] = an, -an
    return float((a @ x) ** 2 / np.sum((x - x.mean()) ** 2))


def random_spd(rng, n, cond_scale=1.0):
    """Random SPD matrix with log-uniform eigenvalues and a Haar rotation."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    eig = np.exp(rng.uniform(-cond_scale, cond_scale, n))
    return (q * eig) @ q.T


def kl_reference(mu1, cov1, mu2, cov2):
    """Textbook KL(N1 || N2) via explicit inverse and slogdet."""
    n = len(mu1)
    inv2 = np.linalg.inv(cov2)
    d = np.asarray(mu2) - np.asarray(mu1)
    return 0.5 * (
        np.linalg.slogdet(cov2)[1] - np.linalg.slogdet(cov1)[1] + np.trace(inv2 @ cov1) + d @ inv2 @ d - n
    )


class GaussianPath:
    """``N(t)`` with ``Sigma(t) = A expm(tS) A^T`` and ``mu(t) = mu + t A w``.

    ``KL(N(0) || N(t))`` is a scalar function of ``t`` in the eigenbasis of
    ``S``, which makes solving ``KL = target`` cheap and exact to bisection
    precision.
    """

    def __init__(self, mu, cov, s_mat, w):
        self.mu = np.asarray(mu, float)
        self.a = np.linalg.cholesky(cov)
        self.s = 0.5 * (s_mat + s_mat.T)
        self.w = np.asarray(w, float)
        self.lam, self.v = np.linalg.eigh(self.s)
        self.wv = self.v.T @ self.w

    def kl_from_start(self, t):
        e = np.exp(-t * self.lam)
        return 0.5 * (np.sum(e) + t * t * np.sum(self.wv**2 * e) + t * np.sum(self.lam) - self.lam.size)

    def at(self, t):
        cov = self.a @ expm(t * self.s) @ self.a.T
        return self.mu + t * (self.a @ self.w), 0.5 * (cov + cov.T)

    def solve(self, target):
        hi = 1e-3
        while self.kl_from_start(hi) < target:
            hi *= 2.0
        return bisect_root(lambda t: self.kl_from_start(t) - target, 0.0, hi)


def random_path(rng, n, start=None):
    """A random ``GaussianPath`` starting at ``start`` (or a random Gaussian).

    One third of the paths move only the mean, one third only the
    covariance and the rest both, so extreme pairs are represented.
    """
    if start is None:
        mu = rng.normal(scale=2.0, size=n)
        cov = random_spd(rng, n, rng.uniform(0.0, 2.0))
    else:
        mu, cov = start
    mode = rng.integers(3)
    s = rng.standard_normal((n, n)) * rng.uniform(0.1, 2.0)
    w = rng.standard_normal(n) * rng.uniform(0.1, 2.0)
    if mode == 0:
        s = np.zeros((n, n))
    elif mode == 1:
        w = np.zeros(n)
    return GaussianPath(mu, cov, s, w)


def pair_at(rng, n, target, start=None):
    """``(N1, N2)`` as ``((mu1, cov1), (mu2, cov2))`` with ``KL(N1 || N2) = target``."""
    path = random_path(rng, n, start)
    return (path.mu, path.a @ path.a.T), path.at(path.solve(target))
