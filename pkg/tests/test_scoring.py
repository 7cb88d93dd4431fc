import math

import numpy as np
import pytest

import oracles
from conftest import unit_at
from ldnorm import (
    DataError,
    Density,
    IntegrityError,
    MethodConfig,
    ScoreVector,
    build_index,
    ensemble_mean,
    precompute_constants,
    score_baseline_knn_mean,
    score_baseline_nn,
    score_batch,
    score_normalized,
)
from ldnorm.geometry import RATIO
from ldnorm.scoring import CLAMP, ReferenceIndex, make_scorer

COS45 = 0.5 * (1 - math.cos(math.radians(45)))


def test_baseline_nn_examples():
    idx = build_index(np.stack([unit_at(0), unit_at(90)]))
    assert score_baseline_nn(unit_at(0), idx) == 0.0
    assert score_baseline_nn(unit_at(10), idx) == pytest.approx(0.0075961, abs=1e-7)
    assert score_baseline_nn(unit_at(10), idx) == pytest.approx(0.5 * (1 - math.cos(math.radians(10))), abs=1e-15)
    single = build_index(unit_at(30)[None, :])
    assert score_baseline_nn(unit_at(100), single) == pytest.approx(0.5 * (1 - math.cos(math.radians(70))), abs=1e-15)


def _at_distance(delta):
    # unit vector whose cosine distance to (1, 0) is delta
    return unit_at(math.degrees(math.acos(1 - 2 * delta)))


def test_knn_mean_examples(rng):
    refs = np.stack([_at_distance(0.1), _at_distance(0.2), _at_distance(0.9)])
    idx = build_index(refs)
    q = unit_at(0)
    assert score_baseline_knn_mean(q, idx, 2) == pytest.approx(0.15, abs=1e-12)
    assert score_baseline_knn_mean(q, idx, 1) == score_baseline_nn(q, idx)
    assert score_baseline_knn_mean(q, idx, 3) == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(ValueError):
        score_baseline_knn_mean(q, idx, 4)


def test_precompute_three_angles():
    refs = np.stack([unit_at(0), unit_at(45), unit_at(90)])
    c = precompute_constants(refs, "cosine", Density.knn(1))
    assert c.values[1] == pytest.approx(0.1464466, abs=1e-7)
    assert c.values == pytest.approx([COS45] * 3, abs=1e-15)
    c2 = precompute_constants(refs, "cosine", Density.knn(2))
    assert c2.values[0] == pytest.approx(COS45 + 0.5, abs=1e-15)


@pytest.mark.parametrize("metric", ["cosine", "squared_euclidean"])
def test_constants_match_oracle(rng, metric):
    refs = rng.standard_normal((9, 3))
    for k in (1, 3, 8):
        c = precompute_constants(refs, metric, Density.knn(k))
        expected = [oracles.knn_constant(refs, i, k, metric) for i in range(9)]
        np.testing.assert_allclose(c.values, expected, rtol=1e-12, atol=1e-12)
    for r in (0.0, 0.3, 0.9, 1.0):
        c = precompute_constants(refs, metric, Density.gwrp(r))
        expected = [oracles.gwrp_constant(refs, i, r, metric) for i in range(9)]
        np.testing.assert_allclose(c.values, expected, rtol=1e-12, atol=1e-12)


def test_gwrp_edge_cases_exact(rng):
    refs = rng.standard_normal((11, 4))
    n = refs.shape[0]
    assert np.array_equal(
        precompute_constants(refs, "cosine", Density.gwrp(0.0)).values,
        precompute_constants(refs, "cosine", Density.knn(1)).values,
    )
    assert np.array_equal(
        precompute_constants(refs, "cosine", Density.gwrp(1.0)).values,
        precompute_constants(refs, "cosine", Density.knn(n - 1)).values,
    )


def test_precompute_errors():
    refs = np.stack([unit_at(0), unit_at(45), unit_at(90)])
    with pytest.raises(DataError):
        precompute_constants(refs, "cosine", Density.knn(3))
    with pytest.raises(DataError):
        precompute_constants(refs[:1], "cosine", Density.gwrp(0.5))


def test_duplicate_references_are_clamped():
    refs = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    c = precompute_constants(refs, "cosine", Density.knn(1))
    assert c.raw[0] == 0.0 and c.values[0] == CLAMP
    assert c.clamped.tolist() == [True, True, False]


def test_normalized_three_reference_example(three_refs):
    idx = build_index(three_refs, density=Density.knn(1))
    q = unit_at(10)
    per_ref = [oracles.cosine(q, y) / COS45 for y in three_refs]
    assert per_ref == pytest.approx([0.05187, 2.8213, 0.61745], abs=5e-5)
    score = score_normalized(q, idx, "ratio")
    assert score == pytest.approx(0.05187, abs=1e-5)
    assert score == pytest.approx(min(per_ref), abs=1e-12)
    assert idx.nearest(q[None, :], RATIO)[1][0] == 0
    assert score_normalized(three_refs[1], idx, "ratio") == 0.0


def test_normalized_matches_oracle(rng):
    for metric in ("cosine", "squared_euclidean"):
        refs = rng.standard_normal((8, 3))
        qs = rng.standard_normal((5, 3))
        for density in (Density.knn(2), Density.gwrp(0.5)):
            idx = build_index(refs, metric, density)
            if density.kind == "knn":
                consts = [oracles.knn_constant(refs, i, 2, metric) for i in range(8)]
            else:
                consts = [oracles.gwrp_constant(refs, i, 0.5, metric) for i in range(8)]
            for q in qs:
                for variant in ("ratio", "difference"):
                    expected = oracles.normalized_score(q, refs, consts, variant, metric)
                    assert score_normalized(q, idx, variant) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_constant_density_identity(rng):
    refs = rng.standard_normal((10, 4))
    idx = ReferenceIndex(refs)
    fixed = idx.with_constants(idx.fixed_constants(0.37))
    for q in rng.standard_normal((20, 4)):
        base = score_baseline_nn(q, idx)
        assert score_normalized(q, fixed, "ratio") == pytest.approx(base / 0.37, rel=1e-14)
        assert score_normalized(q, fixed, "difference") == pytest.approx(base - 0.37, abs=1e-15)


def test_argmin_invariance_under_equal_constants(rng):
    refs = rng.standard_normal((25, 6))
    qs = rng.standard_normal((40, 6))
    idx = ReferenceIndex(refs)
    fixed = idx.with_constants(idx.fixed_constants(2.5))
    base_arg = idx.nearest(qs)[1]
    for mode in (1, 2):
        assert np.array_equal(fixed.nearest(qs, mode)[1], base_arg)


def test_ratio_rescaling_invariance(rng):
    refs = rng.standard_normal((15, 5))
    qs = rng.standard_normal((30, 5))
    idx = build_index(refs, density=Density.knn(2))
    scaled = idx.with_constants(ReferenceIndex(refs).fixed_constants(idx.constants.values * 3.0))
    s1, a1 = idx.nearest(qs, RATIO)
    s2, a2 = scaled.nearest(qs, RATIO)
    assert np.array_equal(a1, a2)
    np.testing.assert_allclose(s2, s1 / 3.0, rtol=1e-14)


def test_density_direction_prefers_sparse_reference():
    # dense cluster at 0 degrees, one isolated reference at 60 degrees with a
    # distant partner; the query sits halfway in angle between them
    refs = np.stack([unit_at(0), unit_at(1), unit_at(-1), unit_at(60), unit_at(100)])
    idx = build_index(refs, density=Density.knn(1))
    q = unit_at(30)
    dense, sparse = oracles.cosine(q, refs[0]), oracles.cosine(q, refs[3])
    assert dense == pytest.approx(sparse, abs=1e-15)
    c = idx.constants.values
    assert c[3] > c[0]
    score, arg = idx.nearest(q[None, :], RATIO)
    assert arg[0] == 3
    assert score[0] < dense / c[0]


def test_precomputation_independent_of_tests(rng):
    refs = rng.standard_normal((30, 4))
    idx = build_index(refs, density=Density.gwrp(0.5))
    before = idx.constants.values.tobytes()
    for _ in range(3):
        score_batch(rng.standard_normal((rng.integers(1, 50), 4)), idx, MethodConfig("norm_ratio", density=Density.gwrp(0.5)))
    assert idx.constants.values.tobytes() == before
    again = precompute_constants(refs, "cosine", Density.gwrp(0.5))
    assert again.values.tobytes() == before


def test_stale_constants_rejected(rng):
    refs = rng.standard_normal((6, 3))
    c = precompute_constants(refs, "cosine", Density.knn(1))
    other = refs.copy()
    other[0, 0] += 1e-9
    with pytest.raises(IntegrityError):
        ReferenceIndex(other, constants=c)
    with pytest.raises(IntegrityError):
        ReferenceIndex(refs, "squared_euclidean", constants=c)
    idx = ReferenceIndex(refs, constants=c)
    with pytest.raises(IntegrityError):
        make_scorer(idx, MethodConfig("norm_ratio", density=Density.knn(2)))


def _domain_refs(rng, n_src=40, n_tgt=6, d=5):
    refs = np.vstack([rng.standard_normal((n_src, d)), rng.standard_normal((n_tgt, d)) + 2.0])
    return refs, ["source"] * n_src + ["target"] * n_tgt


PER_SAMPLE = [
    MethodConfig("baseline_nn"),
    MethodConfig("baseline_knn_mean", k=3),
    MethodConfig("norm_ratio", density=Density.knn(2)),
    MethodConfig("norm_diff", density=Density.gwrp(0.7)),
    MethodConfig("source_means", k_clusters=4),
    MethodConfig("smote"),
    MethodConfig("lof", lof_k=2),
    MethodConfig("norm_ratio", metric="squared_euclidean"),
    MethodConfig("ensemble_mean", members=[MethodConfig("baseline_nn"), MethodConfig("norm_ratio")]),
]


@pytest.mark.parametrize("cfg", PER_SAMPLE, ids=lambda c: f"{c.method}-{c.metric}")
def test_score_batch_matches_single_calls(rng, cfg):
    refs, domains = _domain_refs(rng)
    idx = ReferenceIndex(refs, cfg.metric, domains=domains)
    tests = rng.standard_normal((17, 5))
    batch = score_batch(tests, idx, cfg)
    singles = np.array([score_batch(t[None, :], idx, cfg).scores[0] for t in tests])
    assert np.array_equal(batch.scores, singles)
    perm = rng.permutation(17)
    assert np.array_equal(score_batch(tests[perm], idx, cfg).scores, batch.scores[perm])


def test_score_batch_agrees_with_scalar_functions(rng, three_refs):
    idx = build_index(three_refs, density=Density.knn(1))
    tests = np.stack([unit_at(a) for a in (10, 33, 71, 200)])
    ratio = score_batch(tests, idx, MethodConfig("norm_ratio"))
    base = score_batch(tests, idx, MethodConfig("baseline_nn"))
    for i, t in enumerate(tests):
        assert ratio.scores[i] == score_normalized(t, idx, "ratio")
        assert base.scores[i] == score_baseline_nn(t, idx)


def test_score_batch_needs_domains_for_adaptive_methods(rng):
    idx = ReferenceIndex(rng.standard_normal((10, 3)))
    for method in ("source_means", "smote", "standardization"):
        with pytest.raises(DataError, match="domain"):
            score_batch(rng.standard_normal((2, 3)), idx, MethodConfig(method))


def test_score_batch_dimension_and_metric_checks(rng):
    idx = ReferenceIndex(rng.standard_normal((10, 3)))
    with pytest.raises(DataError):
        score_batch(rng.standard_normal((2, 4)), idx, MethodConfig("baseline_nn"))
    with pytest.raises(ValueError):
        score_batch(rng.standard_normal((2, 3)), idx, MethodConfig("baseline_nn", metric="squared_euclidean"))


def test_ratio_scores_non_negative(rng):
    refs = rng.standard_normal((20, 4))
    idx = build_index(refs, density=Density.knn(1))
    s = score_batch(rng.standard_normal((100, 4)), idx, MethodConfig("norm_ratio"))
    assert np.all(s.scores >= 0)


def test_ensemble_mean():
    a = ScoreVector(["x", "y"], [0.2, 1.0])
    b = ScoreVector(["y", "x"], [3.0, 0.4])
    out = ensemble_mean([a, b])
    assert out.ids == ("x", "y")
    assert out.scores[0] == pytest.approx(0.3, abs=1e-15)
    assert out.scores[1] == pytest.approx(2.0, abs=1e-15)
    assert ensemble_mean([a]).scores.tolist() == a.scores.tolist()
    v = ScoreVector(["p", "q", "r"], [0.1, 0.7, 1 / 3])
    assert np.array_equal(ensemble_mean([v] * 10).scores, v.scores)
    with pytest.raises(DataError):
        ensemble_mean([a, ScoreVector(["x", "z"], [0.0, 0.0])])
