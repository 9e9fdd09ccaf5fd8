"""Seeded generators of synthetic ID/OOD representation ensembles.

``DirectionConcentrated`` places samples near a random ``r``-dimensional
subspace and, by default, rescales them onto the typical shell of
``N(0, I_d)`` (norm ``sqrt(d)``): typical in norm, atypical in direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from klods.errors import DomainError, SchemaError
from klods.gaussian import GaussianParams, PriorSpec, RepresentationSet, cholesky_factor
from klods.manipulations import rescale_to_typical_set


@dataclass(frozen=True)
class Gaussian:
    params: GaussianParams
    seed: int = 0


@dataclass(frozen=True)
class DirectionConcentrated:
    d: int
    r: int
    subspace_scale: Optional[float] = None
    noise_scale: float = 0.3
    rescale_to_typical: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.r < self.d:
            raise DomainError(f"need 1 <= r < d (r={self.r}, d={self.d})")
        if self.subspace_scale is None:
            object.__setattr__(self, "subspace_scale", float(np.sqrt(self.d / self.r)))
        if self.subspace_scale <= 0 or self.noise_scale <= 0:
            raise DomainError("subspace_scale and noise_scale must be positive")

    def basis(self) -> np.ndarray:
        """Orthonormal ``d x d`` rotation from QR of a seeded Gaussian matrix, sign-fixed."""
        rng = np.random.default_rng(self.seed)
        q, r = np.linalg.qr(rng.standard_normal((self.d, self.d)))
        return q * np.where(np.diag(r) < 0, -1.0, 1.0)


@dataclass(frozen=True)
class Scaled:
    inner: "GeneratorSpec"
    factor: float


@dataclass(frozen=True)
class UniformCube:
    d: int
    half_width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.half_width <= 0:
            raise DomainError("UniformCube needs d >= 1 and half_width > 0")


@dataclass(frozen=True)
class Mixture:
    components: Tuple[Tuple["GeneratorSpec", float], ...]
    seed: int = 0

    def __post_init__(self):
        comps = tuple((spec, float(w)) for spec, w in self.components)
        weights = np.array([w for _, w in comps])
        if len(comps) == 0 or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must be nonnegative and sum to 1")
        dims = {spec_dim(s) for s, _ in comps}
        if len(dims) != 1:
            raise DomainError(f"mixture components differ in dimension: {sorted(dims)}")
        object.__setattr__(self, "components", comps)


GeneratorSpec = Union[Gaussian, DirectionConcentrated, Scaled, UniformCube, Mixture]


def spec_dim(spec: GeneratorSpec) -> int:
    if isinstance(spec, Gaussian):
        return spec.params.dim
    if isinstance(spec, Scaled):
        return spec_dim(spec.inner)
    if isinstance(spec, Mixture):
        return spec_dim(spec.components[0][0])
    return spec.d


def _draw(spec: GeneratorSpec, n: int) -> np.ndarray:
    if isinstance(spec, Gaussian):
        rng = np.random.default_rng(spec.seed)
        lower = cholesky_factor(spec.params.cov).lower
        return spec.params.mean + rng.standard_normal((n, spec.params.dim)) @ lower.T
    if isinstance(spec, DirectionConcentrated):
        q = spec.basis()
        # seed stream distinct from the one that built the basis
        rng = np.random.default_rng([spec.seed, 1])
        g = np.hstack([
            spec.subspace_scale * rng.standard_normal((n, spec.r)),
            spec.noise_scale * rng.standard_normal((n, spec.d - spec.r)),
        ])
        w = g @ q.T
        if spec.rescale_to_typical:
            w = rescale_to_typical_set(w, PriorSpec.standard(spec.d))
        return w
    if isinstance(spec, Scaled):
        return spec.factor * _draw(spec.inner, n)
    if isinstance(spec, UniformCube):
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(-spec.half_width, spec.half_width, size=(n, spec.d))
    if isinstance(spec, Mixture):
        rng = np.random.default_rng(spec.seed)
        weights = np.array([w for _, w in spec.components])
        labels = rng.choice(len(weights), size=n, p=weights)
        out = np.empty((n, spec_dim(spec)))
        for i, (component, _) in enumerate(spec.components):
            rows = labels == i
            if rows.any():
                out[rows] = _draw(component, n)[: rows.sum()]
        return out
    raise DomainError(f"unknown generator spec {type(spec).__name__}")


def generate(spec: GeneratorSpec, n: int) -> RepresentationSet:
    """Draw ``n`` representations; output is a deterministic function of ``(spec, n)``."""
    if n < 1:
        raise DomainError("n must be positive")
    return RepresentationSet(_draw(spec, int(n)))


# ---------------------------------------------------------------- JSON


def spec_from_dict(doc: dict, path: str = "spec") -> GeneratorSpec:
    """Build a generator spec from its JSON object form (``{"kind": ..., ...}``)."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SchemaError("generator spec must be an object with a 'kind'", path)
    kind = doc["kind"]
    seed = int(doc.get("seed", 0))
    try:
        if kind == "gaussian":
            return Gaussian(GaussianParams(doc["mean"], doc["cov"]), seed)
        if kind == "direction_concentrated":
            return DirectionConcentrated(
                int(doc["d"]),
                int(doc["r"]),
                doc.get("subspace_scale"),
                float(doc.get("noise_scale", 0.3)),
                bool(doc.get("rescale_to_typical", True)),
                seed,
            )
        if kind == "scaled":
            return Scaled(spec_from_dict(doc["inner"], f"{path}.inner"), float(doc["factor"]))
        if kind == "uniform_cube":
            return UniformCube(int(doc["d"]), float(doc.get("half_width", 1.0)), seed)
        if kind == "mixture":
            comps = tuple(
                (spec_from_dict(c["spec"], f"{path}.components[{i}].spec"), float(c["weight"]))
                for i, c in enumerate(doc["components"])
            )
            return Mixture(comps, seed)
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}", path) from exc
    except DomainError as exc:
        raise SchemaError(str(exc), path) from exc
    raise SchemaError(f"unknown generator kind {kind!r}", f"{path}.kind")


def spec_to_dict(spec: GeneratorSpec) -> dict:
    if isinstance(spec, Gaussian):
        return {"kind": "gaussian", "mean": spec.params.mean.tolist(), "cov": spec.params.cov.tolist(), "seed": spec.seed}
    if isinstance(spec, DirectionConcentrated):
        return {
            "kind": "direction_concentrated",
            "d": spec.d,
            "r": spec.r,
            "subspace_scale": spec.subspace_scale,
            "noise_scale": spec.noise_scale,
            "rescale_to_typical": spec.rescale_to_typical,
            "seed": spec.seed,
        }
    if isinstance(spec, Scaled):
        return {"kind": "scaled", "inner": spec_to_dict(spec.inner), "factor": spec.factor}
    if isinstance(spec, UniformCube):
        return {"kind": "uniform_cube", "d": spec.d, "half_width": spec.half_width, "seed": spec.seed}
    return {
        "kind": "mixture",
        "components": [{"spec": spec_to_dict(s), "weight": w} for s, w in spec.components],
        "seed": spec.seed,
    }
