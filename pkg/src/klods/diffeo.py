"""Exact-density diffeomorphisms and Monte-Carlo phi-divergences.

A :class:`DensityModel` is a base density pushed through a chain of
invertible maps. Its log-density follows the change-of-variables rule::

    log p_Z(z) = log p_X(f^-1(z)) - sum_i log|det J_{f_i}(h_{i-1})|

with the Jacobian terms collected along the inverse pass. The maps are
fixed (affine maps and polynomial coupling layers), so densities are exact
and the invariance of phi-divergences under a shared diffeomorphism can be
checked numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lu_factor, lu_solve, solve_triangular
from scipy.special import logsumexp

from klods.errors import DimensionMismatchError, DomainError, NotPositiveDefiniteError, SchemaError
from klods.gaussian import GaussianParams, as_matrix, cholesky_factor

KINDS = ("kl", "js", "h2", "tv")
_KIND_ALIASES = {
    "kullback-leibler": "kl",
    "jensen-shannon": "js",
    "squared-hellinger": "h2",
    "hellinger": "h2",
    "total-variation": "tv",
}
_CHUNK = 65536
_LOG2 = np.log(2.0)


# ---------------------------------------------------------------- maps


class AffineMap:
    """``z = A x + b`` with ``A`` invertible."""

    def __init__(self, matrix, offset=None):
        a = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionMismatchError(f"affine matrix must be square, got {a.shape}")
        b = np.zeros(n) if offset is None else np.asarray(offset, dtype=np.float64).ravel()
        if b.shape != (n,):
            raise DimensionMismatchError(f"offset length {b.size} != {n}")
        sign, logdet = np.linalg.slogdet(a)
        if sign == 0 or not np.isfinite(logdet) or np.linalg.cond(a) > 1e12:
            raise NotPositiveDefiniteError("affine matrix is singular or ill-conditioned")
        self.matrix = a
        self.offset = b
        self.log_abs_det = float(logdet)
        self._lu = lu_factor(a)

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    def forward(self, x):
        return np.asarray(x, dtype=np.float64) @ self.matrix.T + self.offset

    def inverse(self, z):
        z = np.asarray(z, dtype=np.float64)
        return lu_solve(self._lu, (z - self.offset).T).T

    def log_det_jacobian(self, x):
        x = np.atleast_2d(x)
        return np.full(x.shape[0], self.log_abs_det)

    def to_dict(self) -> dict:
        return {"type": "affine", "matrix": self.matrix.tolist(), "offset": self.offset.tolist()}


def _squash(u):
    # smooth bound into (-2, 2); keeps exp(s) well conditioned
    return 2.0 * u / np.sqrt(1.0 + u * u)


class CouplingMap:
    """Coupling layer conditioned on the first half of the coordinates.

    With ``x = (x1, x2)``, each half of length ``h = n/2``::

        z1 = x1
        z2 = x2 * exp(s(x1)) + t(x1)

    ``s`` and ``t`` are per-output cubic polynomials without cross terms.
    Coefficient tables have shape ``(h, 1 + 3h)``: column 0 is the bias and
    column ``1 + 3i + (p - 1)`` multiplies ``x1[i]**p``. Raw scale
    polynomials are squashed into ``(-2, 2)``. In ``additive`` mode
    ``s = 0``.
    """

    def __init__(self, shift_coef, scale_coef=None, mode: str = "affine"):
        t = np.atleast_2d(np.asarray(shift_coef, dtype=np.float64))
        h = t.shape[0]
        if t.shape != (h, 1 + 3 * h):
            raise DimensionMismatchError(f"shift table must be ({h}, {1 + 3 * h}), got {t.shape}")
        if mode not in ("affine", "additive"):
            raise DomainError(f"coupling mode must be 'affine' or 'additive', got {mode!r}")
        if mode == "additive":
            s = np.zeros_like(t)
        else:
            if scale_coef is None:
                raise DimensionMismatchError("affine coupling needs a scale table")
            s = np.atleast_2d(np.asarray(scale_coef, dtype=np.float64))
            if s.shape != t.shape:
                raise DimensionMismatchError(f"scale table shape {s.shape} != shift table {t.shape}")
        self.shift_coef = t
        self.scale_coef = s
        self.mode = mode
        self.half = h

    @classmethod
    def random(cls, dim: int, rng, strength: float = 0.5, mode: str = "affine") -> "CouplingMap":
        if dim % 2:
            raise DimensionMismatchError("coupling maps need an even dimension")
        h = dim // 2
        decay = np.concatenate([[1.0], np.tile([1.0, 0.3, 0.1], h)])
        shift = strength * rng.standard_normal((h, 1 + 3 * h)) * decay
        scale = strength * rng.standard_normal((h, 1 + 3 * h)) * decay
        return cls(shift, scale, mode)

    @property
    def dim(self) -> int:
        return 2 * self.half

    def _features(self, x1):
        powers = np.stack([x1, x1**2, x1**3], axis=-1).reshape(x1.shape[0], -1)
        return np.hstack([np.ones((x1.shape[0], 1)), powers])

    def _st(self, x1):
        feats = self._features(x1)
        s = np.zeros((x1.shape[0], self.half)) if self.mode == "additive" else _squash(feats @ self.scale_coef.T)
        return s, feats @ self.shift_coef.T

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        x1, x2 = x[:, : self.half], x[:, self.half :]
        s, t = self._st(x1)
        return np.hstack([x1, x2 * np.exp(s) + t])

    def inverse(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        z1, z2 = z[:, : self.half], z[:, self.half :]
        s, t = self._st(z1)
        return np.hstack([z1, (z2 - t) * np.exp(-s)])

    def log_det_jacobian(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        s, _ = self._st(x[:, : self.half])
        return s.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "type": "coupling",
            "mode": self.mode,
            "shift_coef": self.shift_coef.tolist(),
            "scale_coef": self.scale_coef.tolist(),
        }


Map = Union[AffineMap, CouplingMap]


def _chain(maps) -> Tuple[Map, ...]:
    if maps is None:
        return ()
    if isinstance(maps, (AffineMap, CouplingMap)):
        return (maps,)
    return tuple(maps)


def forward(maps, x):
    """Apply a map or a chain of maps, first to last."""
    h = np.asarray(x, dtype=np.float64)
    for m in _chain(maps):
        h = m.forward(h)
    return h


def inverse(maps, z):
    """Invert a map or a chain of maps, last to first."""
    h = np.asarray(z, dtype=np.float64)
    for m in reversed(_chain(maps)):
        h = m.inverse(h)
    return h


def log_det_forward(maps, x):
    """``log|det J|`` of the composed forward map at each row of ``x``."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    total = np.zeros(h.shape[0])
    for m in _chain(maps):
        total += m.log_det_jacobian(h)
        h = m.forward(h)
    return total


# ---------------------------------------------------------------- bases


def _gaussian_logpdf(params: GaussianParams, x):
    factor = cholesky_factor(params.cov)
    u = solve_triangular(factor.lower, (x - params.mean).T, lower=True).T
    return -0.5 * np.sum(u * u, axis=1) - 0.5 * factor.logdet - 0.5 * params.dim * np.log(2 * np.pi)


def _gaussian_sample(params: GaussianParams, n, rng):
    factor = cholesky_factor(params.cov)
    return params.mean + rng.standard_normal((n, params.dim)) @ factor.lower.T


@dataclass(frozen=True)
class GaussianMixture:
    weights: NDArray
    components: Tuple[GaussianParams, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        comps = tuple(self.components)
        if len(comps) == 0 or w.shape != (len(comps),):
            raise DimensionMismatchError("need one weight per mixture component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must be nonnegative and sum to 1")
        if len({c.dim for c in comps}) != 1:
            raise DimensionMismatchError("mixture components differ in dimension")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim


@dataclass(frozen=True)
class StandardizedProduct:
    """Product of ``dim`` iid zero-mean, unit-variance ``uniform`` or ``laplace`` variables."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("uniform", "laplace"):
            raise DomainError(f"unknown product base {self.kind!r}")


Base = Union[GaussianParams, GaussianMixture, StandardizedProduct]


def base_logpdf(base: Base, x) -> NDArray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if isinstance(base, GaussianParams):
        return _gaussian_logpdf(base, x)
    if isinstance(base, GaussianMixture):
        terms = np.stack(
            [np.log(w) + _gaussian_logpdf(c, x) if w > 0 else np.full(x.shape[0], -np.inf)
             for w, c in zip(base.weights, base.components)],
            axis=1,
        )
        return logsumexp(terms, axis=1)
    if base.kind == "uniform":
        half = np.sqrt(3.0)
        inside = np.all(np.abs(x) <= half, axis=1)
        return np.where(inside, -base.dim * np.log(2 * half), -np.inf)
    b = 1.0 / np.sqrt(2.0)
    return -base.dim * np.log(2 * b) - np.sum(np.abs(x), axis=1) / b


def base_sample(base: Base, n: int, rng) -> NDArray:
    if isinstance(base, GaussianParams):
        return _gaussian_sample(base, n, rng)
    if isinstance(base, GaussianMixture):
        labels = rng.choice(len(base.components), size=n, p=base.weights)
        draws = [_gaussian_sample(c, n, rng) for c in base.components]
        return np.stack(draws)[labels, np.arange(n)]
    if base.kind == "uniform":
        half = np.sqrt(3.0)
        return rng.uniform(-half, half, size=(n, base.dim))
    return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(n, base.dim))


def _base_dim(base: Base) -> int:
    return base.dim


@dataclass(frozen=True)
class DensityModel:
    """A base density pushed forward through ``maps`` (applied first to last)."""

    base: Base
    maps: Tuple[Map, ...] = field(default=())

    def __post_init__(self):
        chain = _chain(self.maps)
        for m in chain:
            if m.dim != _base_dim(self.base):
                raise DimensionMismatchError(f"map dim {m.dim} != base dim {_base_dim(self.base)}")
        object.__setattr__(self, "maps", chain)

    @property
    def dim(self) -> int:
        return _base_dim(self.base)

    def logpdf(self, z) -> NDArray:
        return pushforward_logpdf(self, z)

    def sample(self, n: int, rng) -> NDArray:
        return forward(self.maps, base_sample(self.base, n, rng))


def pushforward_logpdf(model: DensityModel, z) -> NDArray:
    """Exact log-density of ``model`` at each row of ``z`` (change of variables)."""
    h = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if h.shape[1] != model.dim:
        raise DimensionMismatchError(f"point dim {h.shape[1]} != model dim {model.dim}")
    correction = np.zeros(h.shape[0])
    for m in reversed(model.maps):
        h = m.inverse(h)
        correction += m.log_det_jacobian(h)
    return base_logpdf(model.base, h) - correction


# ---------------------------------------------------------------- divergences


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    kind: str
    n_samples: int

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error, "kind": self.kind, "n_samples": self.n_samples}


def _kind(kind: str) -> str:
    k = _KIND_ALIASES.get(kind.lower(), kind.lower())
    if k not in KINDS:
        raise DomainError(f"unknown divergence {kind!r}; expected one of {KINDS}")
    return k


def _phi(kind: str, log_ratio):
    """Generator ``phi(p/q)`` evaluated from ``log(p/q)``."""
    ratio = np.exp(log_ratio)
    if kind == "tv":
        return 0.5 * np.abs(1.0 - ratio)
    if kind == "h2":
        return (1.0 - np.exp(0.5 * log_ratio)) ** 2
    # js: x log(2x / (x + 1)) + log(2 / (x + 1))
    softplus = np.logaddexp(0.0, log_ratio)
    with np.errstate(invalid="ignore"):
        first = np.where(ratio > 0, ratio * (_LOG2 + log_ratio - softplus), 0.0)
    return first + _LOG2 - softplus


def _sample_values(sampler: DensityModel, p: DensityModel, q: DensityModel, n: int, seed, fn):
    chunks = -(-n // _CHUNK)
    children = np.random.SeedSequence(seed).spawn(chunks)
    out = []
    for i, child in enumerate(children):
        size = min(_CHUNK, n - i * _CHUNK)
        x = sampler.sample(size, np.random.default_rng(child))
        out.append(fn(p.logpdf(x) - q.logpdf(x)))
    return np.concatenate(out)


def mc_divergence(p: DensityModel, q: DensityModel, kind: str = "kl", n_samples: int = 100_000, seed=0) -> MCEstimate:
    """Monte-Carlo estimate of ``D_phi(p, q)`` with its standard error.

    ``kl`` averages ``log p - log q`` over draws from ``p``; ``js``
    (generator ``x log(2x/(x+1)) + log(2/(x+1))``), ``h2``
    (``(1 - sqrt(x))**2``) and ``tv`` (``|1 - x| / 2``) average
    ``phi(p/q)`` over draws from ``q``. Sampling runs in chunks with seeds
    spawned from ``seed``.
    """
    kind = _kind(kind)
    if n_samples < 100:
        raise DomainError("n_samples must be at least 100")
    if p.dim != q.dim:
        raise DimensionMismatchError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if kind == "kl":
        values = _sample_values(p, p, q, n_samples, seed, lambda r: r)
    else:
        values = _sample_values(q, p, q, n_samples, seed, lambda r: _phi(kind, r))
    return MCEstimate(float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size)), kind, n_samples)


@dataclass(frozen=True)
class PreservationReport:
    kind: str
    before: MCEstimate
    after: MCEstimate
    difference: float
    combined_se: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "difference": self.difference,
            "combined_se": self.combined_se,
            "passed": self.passed,
        }


def verify_preservation(p_base: Base, q_base: Base, maps, kind: str = "kl", n_samples: int = 100_000, seed=0) -> PreservationReport:
    """Compare ``D(p_X, q_X)`` with ``D(p_Z, q_Z)`` under a shared map.

    Both estimates use the same seed, so the pushforward side sees the
    images of the same base draws. Passes when the absolute difference is
    within three combined standard errors.
    """
    before = mc_divergence(DensityModel(p_base), DensityModel(q_base), kind, n_samples, seed)
    after = mc_divergence(DensityModel(p_base, maps), DensityModel(q_base, maps), kind, n_samples, seed)
    diff = abs(after.estimate - before.estimate)
    se = float(np.hypot(before.std_error, after.std_error))
    return PreservationReport(before.kind, before, after, diff, se, bool(diff <= 3.0 * se))


# ---------------------------------------------------------------- JSON descriptions


def map_from_dict(doc) -> Tuple[Map, ...]:
    """Parse ``{"layers": [...]}`` (or a bare list of layers) into a map chain."""
    layers = doc.get("layers") if isinstance(doc, dict) else doc
    if not isinstance(layers, list):
        raise SchemaError("expected a list of layers", "layers")
    chain = []
    for i, layer in enumerate(layers):
        path = f"layers[{i}]"
        if not isinstance(layer, dict) or "type" not in layer:
            raise SchemaError("layer must be an object with a 'type'", path)
        try:
            if layer["type"] == "affine":
                chain.append(AffineMap(layer["matrix"], layer.get("offset")))
            elif layer["type"] == "coupling":
                chain.append(CouplingMap(layer["shift_coef"], layer.get("scale_coef"), layer.get("mode", "affine")))
            else:
                raise SchemaError(f"unknown layer type {layer['type']!r}", f"{path}.type")
        except KeyError as exc:
            raise SchemaError(f"missing field {exc.args[0]!r}", path) from exc
    return tuple(chain)


def maps_to_dict(maps) -> dict:
    return {"layers": [m.to_dict() for m in _chain(maps)]}


def density_from_dict(doc: dict) -> Base:
    """Parse a base density: ``gaussian``, ``mixture`` or ``uniform``/``laplace`` products."""
    if not isinstance(doc, dict):
        raise SchemaError("density must be an object")
    kind = doc.get("kind", "gaussian")
    try:
        if kind == "gaussian":
            return GaussianParams(doc["mean"], doc["cov"])
        if kind == "mixture":
            comps = doc["components"]
            return GaussianMixture(
                [c["weight"] for c in comps],
                tuple(GaussianParams(c["mean"], c["cov"]) for c in comps),
            )
        if kind in ("uniform", "laplace"):
            return StandardizedProduct(kind, int(doc["dim"]))
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}", kind) from exc
    raise SchemaError(f"unknown density kind {kind!r}", "kind")


def density_to_dict(base: Base) -> dict:
    if isinstance(base, GaussianParams):
        return {"kind": "gaussian", "mean": base.mean.tolist(), "cov": base.cov.tolist()}
    if isinstance(base, GaussianMixture):
        return {
            "kind": "mixture",
            "components": [
                {"weight": float(w), "mean": c.mean.tolist(), "cov": c.cov.tolist()}
                for w, c in zip(base.weights, base.components)
            ],
        }
    return {"kind": base.kind, "dim": base.dim}


def moment_matched(kind: str, mean, cov) -> DensityModel:
    """Non-Gaussian density with the given mean and covariance.

    An iid standardized ``uniform`` or ``laplace`` vector pushed through
    ``x -> L u + mean`` with ``L`` the Cholesky factor of ``cov``.
    """
    params = GaussianParams(mean, cov)
    lower = cholesky_factor(params.cov).lower
    return DensityModel(StandardizedProduct(kind, params.dim), (AffineMap(lower, params.mean),))


__all__: Sequence[str] = [
    "AffineMap",
    "CouplingMap",
    "GaussianMixture",
    "StandardizedProduct",
    "DensityModel",
    "MCEstimate",
    "PreservationReport",
    "forward",
    "inverse",
    "log_det_forward",
    "pushforward_logpdf",
    "mc_divergence",
    "verify_preservation",
    "map_from_dict",
    "maps_to_dict",
    "density_from_dict",
    "density_to_dict",
    "moment_matched",
    "base_logpdf",
    "base_sample",
]
