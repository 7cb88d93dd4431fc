import numpy as np
import pytest

import oracles
from ldnorm import DataError, ScoreVector, auc
from ldnorm import baselines
from ldnorm.baselines import (
    LofModel,
    kmeans_fit,
    lof_score,
    score_smote,
    score_source_means,
    smote_oversample,
    standardize_scores_domainwise,
)
from ldnorm.geometry import pairwise_distances


# -- k-means ----------------------------------------------------------------


def test_kmeans_small_examples():
    pts = np.array([[0.0, 0.0], [0.0, 1.0]])
    two = kmeans_fit(pts, 2)
    assert sorted(map(tuple, two.means)) == [(0.0, 0.0), (0.0, 1.0)]
    assert two.inertia == 0.0
    one = kmeans_fit(pts, 1)
    np.testing.assert_array_equal(one.means, [[0.0, 0.5]])
    many = kmeans_fit(pts, 5)
    np.testing.assert_array_equal(many.means, pts)
    with pytest.raises(ValueError):
        kmeans_fit(pts, 0)


def test_kmeans_converged_means_are_centroids(rng):
    x = rng.standard_normal((300, 4))
    m = kmeans_fit(x, 7, seed=3)
    for j in range(7):
        np.testing.assert_allclose(m.means[j], x[m.assignments == j].mean(axis=0), atol=1e-9)
    hist = np.array(m.inertia_history)
    assert np.all(np.diff(hist) <= 1e-9)
    assert m.inertia == pytest.approx(hist[-1], rel=1e-12)


def test_kmeans_deterministic(rng):
    x = rng.standard_normal((200, 3))
    a, b = kmeans_fit(x, 5, seed=11), kmeans_fit(x, 5, seed=11)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.assignments, b.assignments)


def test_kmeans_reseeds_empty_cluster(monkeypatch):
    x = np.array([[0.0], [0.1], [0.2], [10.0], [10.1]])
    # second initial center lies far from every point, so its cluster starts empty
    monkeypatch.setattr(baselines, "_kmeans_pp", lambda x, k, rng: np.array([[0.1], [1000.0]]))
    m = kmeans_fit(x, 2)
    assert sorted(np.bincount(m.assignments).tolist()) == [2, 3]
    np.testing.assert_allclose(sorted(m.means[:, 0]), [0.1, 10.05], atol=1e-12)


def test_source_means_examples(rng):
    src = np.vstack([rng.normal([5, 0], 0.1, (30, 2)), rng.normal([0, 5], 0.1, (30, 2))])
    tgt = np.array([[-3.0, -4.0], [-4.0, -3.0]])
    refs = np.vstack([src, tgt])
    domains = ["source"] * 60 + ["target"] * 2
    assert score_source_means(tgt[0], refs, domains, k=2) == 0.0
    centroid = src[:30].mean(axis=0)
    assert score_source_means(centroid, refs, domains, k=2) == pytest.approx(0.0, abs=1e-12)
    only_src = score_source_means(np.array([1.0, 1.0]), src, ["source"] * 60, k=2)
    means = kmeans_fit(src, 2).means
    assert only_src == pytest.approx(pairwise_distances([[1.0, 1.0]], means).min(), abs=1e-15)
    with pytest.raises(DataError):
        score_source_means(tgt[0], tgt, ["target", "target"], k=2)
    with pytest.raises(DataError):
        score_source_means(tgt[0], refs, ["unknown"] * 62, k=2)


# -- SMOTE ------------------------------------------------------------------


def test_smote_interpolation_formula():
    t = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
    out, origins, lam = smote_oversample(t, 1, 40, seed=2, metric="squared_euclidean", return_origins=True)
    assert out.shape == (40, 2)
    for s, (p, q), l in zip(out[3:], origins, lam):
        np.testing.assert_allclose(s, t[p] + l * (t[q] - t[p]), atol=1e-15)
    # p=(0,0) always pairs with its single nearest neighbor (1,0)
    from_origin = origins[:, 0] == 0
    assert np.all(origins[from_origin, 1] == 1)
    np.testing.assert_allclose(out[3:][from_origin][:, 1], 0.0)
    np.testing.assert_allclose(out[3:][from_origin][:, 0], lam[from_origin])


def test_smote_noop_and_errors(rng):
    t = rng.standard_normal((10, 3))
    np.testing.assert_array_equal(smote_oversample(t, 4, 10), t)
    np.testing.assert_array_equal(smote_oversample(t, 4), t)
    with pytest.raises(DataError):
        smote_oversample(t[:1], 1, 5)
    with pytest.raises(DataError):
        smote_oversample(t[:4], 4, 8)
    with pytest.raises(ValueError):
        smote_oversample(t, 4, 5)


def _on_segment(s, a, b, tol=1e-9):
    ab = b - a
    denom = ab @ ab
    if denom == 0:
        return np.allclose(s, a, atol=tol)
    lam = (s - a) @ ab / denom
    return -tol <= lam <= 1 + tol and np.allclose(a + lam * ab, s, atol=tol)


def test_smote_segment_membership_brute_force(rng):
    t = rng.standard_normal((10, 4))
    out = smote_oversample(t, 4, 200, seed=5)
    np.testing.assert_array_equal(out[:10], t)
    for s in out[10:]:
        ok = any(
            _on_segment(s, t[p], t[q])
            for p in range(10)
            for _, q in oracles.sorted_neighbors(t, p, "cosine")[:4]
        )
        assert ok


def test_smote_deterministic(rng):
    t = rng.standard_normal((8, 3))
    assert np.array_equal(smote_oversample(t, 4, 50, seed=9), smote_oversample(t, 4, 50, seed=9))
    assert not np.array_equal(smote_oversample(t, 4, 50, seed=9), smote_oversample(t, 4, 50, seed=10))


def test_score_smote_examples(rng):
    src = rng.standard_normal((30, 4))
    tgt = rng.standard_normal((6, 4)) + 3
    refs = np.vstack([src, tgt])
    domains = ["source"] * 30 + ["target"] * 6
    assert score_smote(tgt[2], refs, domains) == 0.0
    assert score_smote(src[5], refs, domains) == 0.0
    for q in rng.standard_normal((20, 4)):
        plain = pairwise_distances(q[None, :], refs).min()
        assert score_smote(q, refs, domains, oversample_to=6) == plain
        assert score_smote(q, refs, domains) <= plain


# -- LOF --------------------------------------------------------------------


def test_lof_unit_square_corner():
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert lof_score(corners[0], corners, 2, "squared_euclidean") == pytest.approx(1.0, abs=1e-12)
    assert oracles.lof(corners[0], corners, 2, "squared_euclidean") == pytest.approx(1.0, abs=1e-12)


def test_lof_far_query_is_outlier(rng):
    refs = rng.standard_normal((25, 3))
    q = np.full(3, 20.0)
    v = lof_score(q, refs, 3, "squared_euclidean")
    assert v > 1
    assert v == pytest.approx(oracles.lof(q, refs, 3, "squared_euclidean"), rel=1e-9)


def test_lof_regular_simplex():
    refs = np.eye(6)  # pairwise equidistant
    for k in (1, 2, 4):
        model = LofModel(refs, k, "squared_euclidean")
        for i in range(6):
            loo = np.delete(refs, i, axis=0)
            assert lof_score(refs[i], loo, k, "squared_euclidean") == pytest.approx(1.0, abs=1e-12)
            assert model.score(refs[i][None, :])[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("metric", ["cosine", "squared_euclidean"])
def test_lof_matches_oracle(rng, metric):
    for k in (1, 2, 5):
        refs = rng.standard_normal((12, 3))
        model = LofModel(refs, k, metric)
        qs = rng.standard_normal((6, 3))
        got = model.score(qs)
        for q, g in zip(qs, got):
            assert g == pytest.approx(oracles.lof(q, refs, k, metric), rel=1e-9, abs=1e-9)


def test_lof_degenerate_neighborhood_is_flagged():
    refs = np.array([[1.0, 0.0]] * 3 + [[0.0, 1.0]])
    model = LofModel(refs, 1, "squared_euclidean")
    assert model.degenerate.tolist() == [True, True, True, False]
    lof, flags = model.score(np.array([[1.0, 0.0], [0.5, 0.5]]), return_flags=True)
    assert flags.tolist() == [True, False]
    assert np.all(np.isfinite(lof))


def test_lof_k_range():
    with pytest.raises(DataError):
        LofModel(np.eye(3), 3)


# -- standardization ----------------------------------------------------------


def _vec(values, ids=None):
    ids = ids or [f"s{i}" for i in range(len(values))]
    return ScoreVector(ids, values)


def test_standardized_populations(rng):
    a, b = rng.random(30), rng.random(30) * 4 + 1
    za = (a - a.mean()) / a.std()
    zb = (b - b.mean()) / b.std()
    assert za.mean() == pytest.approx(0, abs=1e-9) and za.std() == pytest.approx(1, abs=1e-9)
    out = standardize_scores_domainwise(_vec(a), _vec(b))
    np.testing.assert_allclose(out.scores, np.minimum(za, zb), atol=1e-12)


def test_standardized_identical_inputs(rng):
    a = rng.random(20)
    out = standardize_scores_domainwise(_vec(a), _vec(a))
    np.testing.assert_allclose(out.scores, (a - a.mean()) / a.std(), atol=1e-12)


def test_standardized_shift_invariance(rng):
    a, b = rng.random(25), rng.random(25)
    out = standardize_scores_domainwise(_vec(a), _vec(b))
    shifted = standardize_scores_domainwise(_vec(a + 7.5), _vec(b))
    np.testing.assert_allclose(shifted.scores, out.scores, atol=1e-12)


def test_standardized_auc_invariant_to_affine_rescaling(rng):
    a, b = rng.random(40), rng.random(40)
    labels = ["anomaly" if x else "normal" for x in rng.random(40) < 0.4]
    ref = auc(standardize_scores_domainwise(_vec(a), _vec(b)).scores, labels)
    for scale, shift in ((2.0, 0.0), (0.5, 3.0), (17.0, -4.0)):
        out = standardize_scores_domainwise(_vec(scale * a + shift), _vec(b))
        assert auc(out.scores, labels) == pytest.approx(ref, abs=1e-12)


def test_standardized_id_mismatch_and_alignment():
    a = _vec([0.0, 1.0, 2.0], ["x", "y", "z"])
    b = ScoreVector(["z", "x", "y"], [2.0, 0.0, 1.0])
    np.testing.assert_allclose(standardize_scores_domainwise(a, b).scores, standardize_scores_domainwise(a, a).scores)
    with pytest.raises(DataError):
        standardize_scores_domainwise(a, _vec([0.0, 1.0, 2.0], ["x", "y", "w"]))


def test_standardization_is_batch_dependent(rng):
    refs = rng.standard_normal((20, 3))
    domains = ["source"] * 15 + ["target"] * 5
    tests = rng.standard_normal((10, 3))
    full = baselines.score_standardized(tests, refs, domains)
    part = baselines.score_standardized(tests[:5], refs, domains)
    assert not np.allclose(full[:5], part)
