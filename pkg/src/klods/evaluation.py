"""Threshold-free evaluation of group-wise and point-wise detectors.

OOD is the positive class. Each repetition reshuffles both datasets into
disjoint groups of ``m`` rows (remainders dropped), scores every group and
computes AUROC and AUPR; the report gives mean and population std over
repetitions. Point-wise detection is the ``m = 1`` case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy.stats import rankdata

from klods.baselines import latent_typicality_score
from klods.detector import DetectorConfig, score_group
from klods.errors import InsufficientSamplesError, KlodsError
from klods.gaussian import RepresentationSet, as_matrix
from klods.synthetic import GeneratorSpec, generate, spec_to_dict

METHODS = ("detector", "latent_typicality")


def _scores(values, name) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InsufficientSamplesError(f"{name} scores are empty")
    if np.any(np.isnan(v)):
        raise KlodsError(f"{name} scores contain NaN")
    return v


def auroc(id_scores, ood_scores) -> float:
    """Mann-Whitney AUROC: ``(#{ood > id} + #{ties} / 2) / (n_id * n_ood)``."""
    neg = _scores(id_scores, "id")
    pos = _scores(ood_scores, "ood")
    ranks = rankdata(np.concatenate([neg, pos]))
    u = ranks[neg.size:].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (neg.size * pos.size))


def aupr(id_scores, ood_scores) -> float:
    """Average precision with OOD positive; tied scores form one block."""
    neg = _scores(id_scores, "id")
    pos = _scores(ood_scores, "ood")
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size, dtype=np.int64), np.zeros(neg.size, dtype=np.int64)])
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    block_end = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    tp = np.cumsum(y)[block_end]
    seen = block_end + 1
    pos_in_block = np.diff(np.concatenate([[0], tp]))
    precision = tp / seen
    # fsum makes the result independent of summation order
    return math.fsum(np.repeat(precision, pos_in_block).tolist()) / pos.size


def make_groups(data, m: int, seed) -> List[RepresentationSet]:
    """Shuffle rows and cut ``floor(N / m)`` disjoint groups of ``m``; drop the remainder."""
    shape = data.tensor_shape if isinstance(data, RepresentationSet) else None
    x = as_matrix(data)
    if m < 1:
        raise KlodsError("group size must be >= 1")
    if x.shape[0] < m:
        raise InsufficientSamplesError(f"{x.shape[0]} rows cannot fill a group of {m}")
    perm = np.random.default_rng(seed).permutation(x.shape[0])
    n_groups = x.shape[0] // m
    idx = perm[: n_groups * m].reshape(n_groups, m)
    return [RepresentationSet(x[rows], shape) for rows in idx]


@dataclass(frozen=True)
class SyntheticSource:
    spec: GeneratorSpec
    n: int


Source = Union[np.ndarray, RepresentationSet, SyntheticSource, str]


def load_source(source: Source) -> RepresentationSet:
    if isinstance(source, RepresentationSet):
        return source
    if isinstance(source, SyntheticSource):
        return generate(source.spec, source.n)
    if isinstance(source, str):
        from klods.io import load_matrix

        return load_matrix(source)
    return RepresentationSet(as_matrix(source))


def _describe(source: Source):
    if isinstance(source, SyntheticSource):
        return {"synthetic": spec_to_dict(source.spec), "n": source.n}
    if isinstance(source, str):
        return {"path": source}
    x = source.data if isinstance(source, RepresentationSet) else as_matrix(source)
    return {"array_shape": list(x.shape)}


@dataclass(frozen=True)
class ExperimentConfig:
    """One detection experiment.

    ``method='detector'`` scores groups with :func:`score_group` under
    ``detector``; ``method='latent_typicality'`` uses the latent-space
    typicality baseline with ``detector.prior``.
    """

    detector: DetectorConfig
    id_source: Source
    ood_source: Source
    batch_size: int = 5
    repetitions: int = 5
    seed: int = 0
    method: str = "detector"

    def __post_init__(self):
        if self.batch_size < 1 or self.repetitions < 1:
            raise KlodsError("batch_size and repetitions must be >= 1")
        if self.method not in METHODS:
            raise KlodsError(f"unknown method {self.method!r}; expected one of {METHODS}")

    def echo(self) -> dict:
        det = self.detector
        return {
            "method": self.method,
            "criterion": det.criterion,
            "split": str(det.split),
            "ridge": det.ridge,
            "threshold": det.threshold,
            "prior_dim": det.prior.dim,
            "batch_size": self.batch_size,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "id_source": _describe(self.id_source),
            "ood_source": _describe(self.ood_source),
        }


@dataclass
class DetectionReport:
    config: dict
    repetitions: List[dict]
    auroc_mean: float
    auroc_std: float
    aupr_mean: float
    aupr_std: float
    scores: Optional[List[dict]] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "repetitions": self.repetitions,
            "auroc_mean": self.auroc_mean,
            "auroc_std": self.auroc_std,
            "aupr_mean": self.aupr_mean,
            "aupr_std": self.aupr_std,
        }
        if self.scores is not None:
            out["scores"] = self.scores
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectionReport":
        return cls(
            doc["config"],
            [dict(r) for r in doc["repetitions"]],
            doc["auroc_mean"],
            doc["auroc_std"],
            doc["aupr_mean"],
            doc["aupr_std"],
            doc.get("scores"),
        )


def _scorer(config: ExperimentConfig) -> Callable:
    if config.method == "latent_typicality":
        return lambda batch: latent_typicality_score(batch, config.detector.prior)
    return lambda batch: score_group(batch, config.detector).score


def run_experiment(config: ExperimentConfig, keep_scores: bool = False) -> DetectionReport:
    """Run ``config.repetitions`` shuffled repetitions and summarize AUROC/AUPR."""
    id_data = load_source(config.id_source)
    ood_data = load_source(config.ood_source)
    score = _scorer(config)
    children = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    reps, kept = [], []
    for child in children:
        rep_seed = int(child.generate_state(1)[0])
        id_scores = [score(g) for g in make_groups(id_data, config.batch_size, [rep_seed, 0])]
        ood_scores = [score(g) for g in make_groups(ood_data, config.batch_size, [rep_seed, 1])]
        reps.append({"seed": rep_seed, "auroc": auroc(id_scores, ood_scores), "aupr": aupr(id_scores, ood_scores)})
        if keep_scores:
            kept.append({"id": id_scores, "ood": ood_scores})
    a = np.array([r["auroc"] for r in reps])
    p = np.array([r["aupr"] for r in reps])
    return DetectionReport(
        config.echo(),
        reps,
        float(a.mean()),
        float(a.std()),
        float(p.mean()),
        float(p.std()),
        kept if keep_scores else None,
    )
