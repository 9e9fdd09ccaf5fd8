import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from klods.decomposition import SplitConfig
from klods.detector import DetectorConfig, score_group
from klods.errors import InsufficientSamplesError, KlodsError
from klods.evaluation import (
    DetectionReport,
    ExperimentConfig,
    SyntheticSource,
    aupr,
    auroc,
    make_groups,
    run_experiment,
)
from klods.gaussian import GaussianParams, PriorSpec, RepresentationSet
from klods.synthetic import DirectionConcentrated, Gaussian
from oracles import brute_aupr, brute_auroc

scores = st.lists(st.integers(-5, 5).map(float) | st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=25)
int_scores = st.lists(st.integers(-100, 100), min_size=1, max_size=25)


def _instances(seed, count=100):
    r = np.random.default_rng(seed)
    for _ in range(count):
        n_neg, n_pos = r.integers(1, 40, size=2)
        # coarse rounding forces plenty of ties
        yield np.round(r.normal(size=n_neg), 1), np.round(r.normal(0.5, 1, size=n_pos), 1)


# ---------------------------------------------------------------- auroc


def test_auroc_examples():
    assert auroc([0, 1], [2, 3]) == 1.0
    assert auroc([4, 4, 4], [4, 4]) == 0.5
    assert auroc([1, 2], [1.5, 3]) == 0.75


def test_auroc_matches_pair_count_exactly():
    for neg, pos in _instances(1):
        assert auroc(neg, pos) == brute_auroc(neg, pos)


@settings(max_examples=200, deadline=None)
@given(scores, scores)
def test_auroc_complement(a, b):
    assert auroc(a, b) + auroc(b, a) == 1.0


@settings(max_examples=100, deadline=None)
@given(int_scores, int_scores)
def test_auroc_invariant_under_increasing_transform(a, b):
    # integer inputs keep the transforms strictly increasing in floating point
    for f in (lambda v: np.exp(np.asarray(v) / 7.0), lambda v: np.asarray(v, float) ** 3 - 4.0):
        assert auroc(f(a), f(b)) == auroc(a, b)


def test_auroc_errors():
    with pytest.raises(InsufficientSamplesError):
        auroc([], [1.0])
    with pytest.raises(KlodsError):
        auroc([np.nan], [1.0])


# ---------------------------------------------------------------- aupr


def test_aupr_examples():
    assert aupr([0, 1], [2, 3]) == 1.0
    assert aupr([1.0], [0.0]) == 0.5


def test_aupr_tied_block():
    # one positive tied with one negative: precision of the block is 1/2
    assert aupr([1.0, 0.0], [1.0]) == 0.5


def test_aupr_matches_rank_walk_exactly():
    for neg, pos in _instances(2):
        assert aupr(neg, pos) == brute_aupr(neg, pos)


@settings(max_examples=100, deadline=None)
@given(scores, scores)
def test_aupr_in_unit_interval_and_order_free(a, b):
    v = aupr(a, b)
    assert 0.0 < v <= 1.0
    assert aupr(a[::-1], b[::-1]) == v


# ---------------------------------------------------------------- grouping


def test_make_groups_counts():
    x = np.arange(10.0)[:, None]
    groups = make_groups(x, 5, 0)
    assert len(groups) == 2
    assert sorted(np.concatenate([g.data[:, 0] for g in groups])) == list(range(10))
    groups = make_groups(np.arange(11.0)[:, None], 5, 0)
    assert len(groups) == 2
    assert len(np.unique(np.concatenate([g.data[:, 0] for g in groups]))) == 10


def test_make_groups_deterministic_and_shuffled():
    x = np.arange(100.0)[:, None]
    a = [g.data for g in make_groups(x, 10, [3, 1])]
    b = [g.data for g in make_groups(x, 10, [3, 1])]
    for ga, gb in zip(a, b):
        np.testing.assert_array_equal(ga, gb)
    assert not np.array_equal(np.concatenate(a)[:, 0], np.arange(100.0))


def test_make_groups_keeps_tensor_shape():
    reps = RepresentationSet(np.zeros((6, 12)), (2, 2, 3))
    assert all(g.tensor_shape == (2, 2, 3) for g in make_groups(reps, 3, 0))


def test_make_groups_errors():
    with pytest.raises(InsufficientSamplesError):
        make_groups(np.zeros((3, 2)), 5, 0)
    with pytest.raises(KlodsError):
        make_groups(np.zeros((3, 2)), 0, 0)


# ---------------------------------------------------------------- experiments


def _config(id_source, ood_source, **kw):
    det = DetectorConfig(PriorSpec.standard(16), SplitConfig.parse("contiguous:4"))
    return ExperimentConfig(det, id_source, ood_source, **kw)


def test_identical_sources_give_chance_auroc():
    src = SyntheticSource(Gaussian(GaussianParams.standard(16), seed=1), 1000)
    report = run_experiment(_config(src, src, repetitions=5, seed=3))
    assert 0.4 <= report.auroc_mean <= 0.6


def test_single_repetition_has_zero_std():
    src = SyntheticSource(Gaussian(GaussianParams.standard(16), seed=1), 200)
    ood = SyntheticSource(DirectionConcentrated(16, 2, seed=2), 200)
    report = run_experiment(_config(src, ood, repetitions=1))
    assert report.auroc_std == 0.0 and report.aupr_std == 0.0
    assert len(report.repetitions) == 1


def test_report_metrics_and_population_std():
    src = SyntheticSource(Gaussian(GaussianParams.standard(16), seed=1), 300)
    ood = SyntheticSource(DirectionConcentrated(16, 2, seed=2), 300)
    report = run_experiment(_config(src, ood, repetitions=4))
    a = np.array([r["auroc"] for r in report.repetitions])
    assert report.auroc_mean == pytest.approx(a.mean(), rel=1e-15)
    assert report.auroc_std == pytest.approx(np.sqrt(np.mean((a - a.mean()) ** 2)), rel=1e-12)
    for rep in report.repetitions:
        assert 0.0 <= rep["auroc"] <= 1.0 and 0.0 <= rep["aupr"] <= 1.0
    assert len({rep["seed"] for rep in report.repetitions}) == 4


def test_report_bytes_reproducible():
    src = SyntheticSource(Gaussian(GaussianParams.standard(16), seed=1), 200)
    ood = SyntheticSource(DirectionConcentrated(16, 2, seed=2), 200)
    dump = lambda: json.dumps(run_experiment(_config(src, ood, seed=7)).to_dict(), sort_keys=True)
    assert dump() == dump()


def test_report_dict_round_trip():
    src = SyntheticSource(Gaussian(GaussianParams.standard(16), seed=1), 100)
    report = run_experiment(_config(src, src, repetitions=2), keep_scores=True)
    back = DetectionReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert back.to_dict() == report.to_dict()
    assert len(back.scores) == 2 and len(back.scores[0]["id"]) == 20


def test_point_detection_is_group_size_one():
    # the m = 1 run matches scoring each point on its own, with the same seeds
    id_x = np.random.default_rng(1).standard_normal((60, 16))
    ood_x = 1.5 * np.random.default_rng(2).standard_normal((60, 16))
    cfg = _config(id_x, ood_x, batch_size=1, repetitions=2, seed=5)
    report = run_experiment(cfg, keep_scores=True)
    for rep, kept in zip(report.repetitions, report.scores):
        perm_id = np.random.default_rng([rep["seed"], 0]).permutation(60)
        expected = [score_group(id_x[[i]], cfg.detector).score for i in perm_id]
        assert kept["id"] == expected


def test_latent_typicality_method():
    shell = SyntheticSource(DirectionConcentrated(16, 2, seed=2), 200)
    cfg = _config(SyntheticSource(Gaussian(GaussianParams.standard(16)), 200), shell, method="latent_typicality")
    report = run_experiment(cfg, keep_scores=True)
    assert all(s == pytest.approx(0.0, abs=1e-12) for s in report.scores[0]["ood"])
    assert report.config["method"] == "latent_typicality"


def test_config_validation():
    src = np.zeros((10, 16))
    with pytest.raises(KlodsError):
        _config(src, src, batch_size=0)
    with pytest.raises(KlodsError):
        _config(src, src, repetitions=0)
    with pytest.raises(KlodsError):
        _config(src, src, method="magic")
