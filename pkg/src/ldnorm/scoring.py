"""Nearest-neighbor anomaly scores with local-density normalization.

For a reference set ``X`` the baseline score of a test embedding ``x`` is
``min_y A(x, y)``. The normalized scores rescale each reference by a
constant ``c(y)`` describing how crowded its neighborhood is::

    ratio:       min_y A(x, y) / c(y)
    difference:  min_y A(x, y) - c(y)

with ``y_k`` the k-th closest other reference to ``y`` and

    knn(K):   c(y) = sum_{k=1..K} A(y, y_k)
    gwrp(r):  c(y) = sum_{k=1..|X|-1} A(y, y_k) * r**(k-1)      (0**0 = 1)

References in dense regions get small constants and are pushed away;
isolated references are pulled closer. The constants only depend on the
reference set, so they are computed once and add no per-query work.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import baselines
from .core import DataError, Density, IntegrityError, MethodConfig, ScoreVector, as_embeddings, as_vector, digest
from .geometry import DIFF, RATIO, RAW, metric_code, nearest_reduce, pairwise_distances, row_sq_norms
from .neighbors import NeighborTable, build_neighbor_table

CLAMP = 1e-12


@dataclass(frozen=True)
class NormalizationConstants:
    """Per-reference density constants.

    ``values`` are clamped to at least ``CLAMP`` (duplicated references
    have zero distance to their neighbor); ``raw`` keeps the unclamped
    sums. ``density`` is ``None`` for constants supplied by hand.
    """

    values: np.ndarray
    raw: np.ndarray
    density: Optional[Density]
    metric: str
    refs_fingerprint: str

    @property
    def fingerprint(self) -> str:
        label = "fixed" if self.density is None else self.density.label()
        return digest(self.refs_fingerprint, label, self.values)

    @property
    def clamped(self) -> np.ndarray:
        return self.raw < CLAMP


def _density_sums(table: NeighborTable, density: Density) -> np.ndarray:
    n = table.n
    if density.kind == "knn":
        if density.k > n - 1:
            raise DataError(
                f"knn density K={density.k} needs more than {density.k} references, got {n}"
            )
        terms = table.dist[:, : density.k]
    else:
        # r**0 == 1 even for r == 0
        weights = density.r ** np.arange(n - 1, dtype=np.float64)
        terms = table.dist * weights
    # cumsum sums strictly left to right, so gwrp(1) reproduces knn(n-1) and
    # gwrp(0) reproduces knn(1) exactly
    return np.cumsum(terms, axis=1)[:, -1]


def precompute_constants(refs, metric: str = "cosine", density: Density = Density(), table=None):
    refs = as_embeddings(refs, "references")
    if refs.shape[0] < 2:
        raise DataError(f"density constants need at least 2 references, got {refs.shape[0]}")
    if table is None:
        table = build_neighbor_table(refs, metric)
    raw = _density_sums(table, density)
    values = np.maximum(raw, CLAMP)
    raw.setflags(write=False)
    values.setflags(write=False)
    return NormalizationConstants(values, raw, density, metric, digest(refs, metric))


class ReferenceIndex:
    """Immutable reference set with cached neighbor table and constants.

    Parameters
    ----------
    refs : array (n, d)
        Normal training embeddings.
    metric : {"cosine", "squared_euclidean"}
    constants : NormalizationConstants, optional
        Constants used by the normalized scores. When absent they are
        computed on demand from the requested density.
    domains : sequence of str, optional
        Per-reference domain labels; only the baselines that adapt to the
        target domain read them.
    """

    def __init__(self, refs, metric="cosine", constants=None, domains=None):
        metric_code(metric)
        self.refs = as_embeddings(refs, "references")
        self.refs.setflags(write=False)
        self.metric = metric
        self.sq_norms = row_sq_norms(self.refs, metric, "references")
        self.fingerprint = digest(self.refs, metric)
        self.domains = None if domains is None else np.asarray(domains, dtype=str)
        if self.domains is not None and self.domains.shape != (self.refs.shape[0],):
            raise DataError("one domain label per reference row is required")
        if constants is not None:
            self._check(constants)
        self.constants = constants
        self._by_density = {}
        self._prepared = {}

    @property
    def n(self) -> int:
        return self.refs.shape[0]

    @cached_property
    def table(self) -> NeighborTable:
        return build_neighbor_table(self.refs, self.metric)

    def _check(self, constants: NormalizationConstants):
        if constants.refs_fingerprint != self.fingerprint or constants.metric != self.metric:
            raise IntegrityError("normalization constants were computed for different references")
        if constants.values.shape != (self.n,):
            raise IntegrityError("normalization constants have the wrong length")

    def with_constants(self, constants) -> "ReferenceIndex":
        return ReferenceIndex(self.refs, self.metric, constants, self.domains)

    def constants_for(self, density: Density) -> NormalizationConstants:
        if density not in self._by_density:
            self._by_density[density] = precompute_constants(self.refs, self.metric, density, self.table)
        return self._by_density[density]

    def fixed_constants(self, values) -> NormalizationConstants:
        """Hand-supplied constants (scalar broadcasts to every reference)."""
        v = np.broadcast_to(np.asarray(values, dtype=np.float64), (self.n,)).copy()
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("fixed constants must be finite and positive")
        v.setflags(write=False)
        return NormalizationConstants(v, v, None, self.metric, self.fingerprint)

    def _resolve(self, density: Optional[Density]) -> NormalizationConstants:
        if self.constants is not None:
            if density is not None and self.constants.density not in (None, density):
                raise IntegrityError(
                    f"index holds {self.constants.density.label()} constants, "
                    f"{density.label()} requested"
                )
            return self.constants
        return self.constants_for(density or Density())

    def nearest(self, queries, mode=RAW, density=None):
        q = as_embeddings(queries, "queries")
        c = None if mode == RAW else self._resolve(density).values
        return nearest_reduce(q, self.refs, self.metric, r_sq=self.sq_norms, c=c, mode=mode)


def build_index(refs, metric="cosine", density=None, domains=None) -> ReferenceIndex:
    """Reference index, with constants precomputed when ``density`` is given."""
    idx = ReferenceIndex(refs, metric, domains=domains)
    if density is not None:
        idx = idx.with_constants(idx.constants_for(density))
    return idx


def _query(q, idx):
    q = as_vector(q, "query")
    if q.shape[0] != idx.refs.shape[1]:
        raise DataError(f"query dimension {q.shape[0]} != reference dimension {idx.refs.shape[1]}")
    return q[None, :]


def score_baseline_nn(q, idx: ReferenceIndex) -> float:
    return float(idx.nearest(_query(q, idx))[0][0])


def knn_mean_scores(queries, idx: ReferenceIndex, k: int) -> np.ndarray:
    if not 1 <= k <= idx.n:
        raise ValueError(f"k={k} outside [1, {idx.n}]")
    q = as_embeddings(queries, "queries")
    d = np.sort(pairwise_distances(q, idx.refs, idx.metric), axis=1)[:, :k]
    return baselines.row_mean(d)


def score_baseline_knn_mean(q, idx: ReferenceIndex, k: int) -> float:
    return float(knn_mean_scores(_query(q, idx), idx, k)[0])


def score_normalized(q, idx: ReferenceIndex, variant: str = "ratio", density: Optional[Density] = None) -> float:
    """Normalized score of one test embedding (``variant`` ratio or difference)."""
    mode = _variant_mode(variant)
    return float(idx.nearest(_query(q, idx), mode, density)[0][0])


def _variant_mode(variant):
    if variant == "ratio":
        return RATIO
    if variant == "difference":
        return DIFF
    raise ValueError(f"unknown variant {variant!r}; expected 'ratio' or 'difference'")


def _check_domains(idx, method):
    if idx.domains is None:
        raise DataError(f"{method} requires domain labels for the references")
    return idx.domains


def make_scorer(idx: ReferenceIndex, cfg: MethodConfig):
    """Function mapping an ``(m, d)`` test batch to ``m`` scores.

    Everything that depends only on the references (constants, k-means
    centroids, SMOTE rows, LOF densities) is prepared here once.
    """
    if cfg.metric != idx.metric:
        raise ValueError(f"config metric {cfg.metric!r} != index metric {idx.metric!r}")
    method = cfg.method
    if method == "baseline_nn":
        return lambda t: idx.nearest(t)[0]
    if method == "baseline_knn_mean":
        return lambda t: knn_mean_scores(t, idx, cfg.k)
    if method in ("norm_ratio", "norm_diff"):
        mode = RATIO if method == "norm_ratio" else DIFF
        const = idx._resolve(cfg.density)
        return lambda t: nearest_reduce(
            as_embeddings(t, "queries"), idx.refs, idx.metric, r_sq=idx.sq_norms, c=const.values, mode=mode
        )[0]
    if method == "source_means":
        aug = baselines.source_means_references(idx.refs, _check_domains(idx, method), cfg.k_clusters, cfg.seed)
        aug_sq = row_sq_norms(aug, idx.metric, "k-means references")
        return lambda t: nearest_reduce(t, aug, idx.metric, r_sq=aug_sq)[0]
    if method == "smote":
        aug = baselines.smote_references(
            idx.refs, _check_domains(idx, method), cfg.smote_neighbors, cfg.oversample_to, cfg.seed, idx.metric
        )
        aug_sq = row_sq_norms(aug, idx.metric, "SMOTE references")
        return lambda t: nearest_reduce(t, aug, idx.metric, r_sq=aug_sq)[0]
    if method == "lof":
        model = baselines.LofModel(idx.refs, cfg.lof_k, idx.metric)
        return model.score
    if method == "standardization":
        domains = _check_domains(idx, method)
        return lambda t: baselines.score_standardized(t, idx.refs, domains, idx.metric)
    if method == "ensemble_mean":
        scorers = [make_scorer(idx, m) for m in cfg.members]
        return lambda t: _mean_rows(np.stack([s(t) for s in scorers]))
    raise ValueError(f"unknown method {method!r}")


def _mean_rows(stacked):
    # shifted by the first system so that identical inputs average to themselves exactly
    first = stacked[0]
    return first + np.cumsum(stacked - first, axis=0)[-1] / stacked.shape[0]


def score_batch(tests, idx: ReferenceIndex, cfg: MethodConfig, ids=None) -> ScoreVector:
    """Score every row of ``tests``.

    For every method except standardization row ``i`` of the result is
    bit-identical to scoring row ``i`` on its own.
    """
    tests = as_embeddings(tests, "tests")
    if tests.shape[1] != idx.refs.shape[1]:
        raise DataError(f"test dimension {tests.shape[1]} != reference dimension {idx.refs.shape[1]}")
    if ids is None:
        ids = tuple(str(i) for i in range(tests.shape[0]))
    return ScoreVector(ids, make_scorer(idx, cfg)(tests))


def ensemble_mean(score_vectors) -> ScoreVector:
    """Per-sample arithmetic mean of several systems' scores."""
    vectors = list(score_vectors)
    if not vectors:
        raise ValueError("ensemble_mean needs at least one score vector")
    ids = vectors[0].ids
    for v in vectors[1:]:
        if set(v.ids) != set(ids) or len(v.ids) != len(ids):
            raise DataError("score vectors cover different sample ids")
    stacked = np.stack([v.reindex(ids).scores for v in vectors])
    return ScoreVector(ids, _mean_rows(stacked))


def section_indices(ds, metric: str = "cosine") -> dict:
    """One ``ReferenceIndex`` per section built from its train rows.

    Sections are scored fully independently: a test sample is only ever
    compared with the train samples of its own section.
    """
    out = {}
    for sec in ds.sections():
        train = ds.rows(section=sec, split="train")
        if train.size == 0:
            continue
        domains = [ds.metas[i].domain for i in train]
        out[sec] = ReferenceIndex(ds.embeddings[train], metric, domains=domains)
    return out


def score_dataset(ds, cfg: MethodConfig, indices=None, constants=None) -> ScoreVector:
    """Scores for every test row of ``ds``, in dataset row order.

    ``indices`` may carry prebuilt per-section indices (from
    ``section_indices``); ``constants`` maps section names to precomputed
    ``NormalizationConstants`` which then take precedence over ``cfg.density``.
    """
    if indices is None:
        indices = section_indices(ds, cfg.metric)
    test_rows = ds.rows(split="test")
    scores = np.empty(test_rows.size)
    position = {r: k for k, r in enumerate(test_rows)}
    for sec in ds.sections():
        rows = ds.rows(section=sec, split="test")
        if rows.size == 0:
            continue
        if sec not in indices:
            raise DataError(f"section {sec!r} has no train samples to use as references")
        idx = indices[sec]
        if constants is not None and sec in constants:
            idx = idx.with_constants(constants[sec])
        scores[[position[r] for r in rows]] = make_scorer(idx, cfg)(ds.embeddings[rows])
    return ScoreVector(tuple(ds.metas[r].id for r in test_rows), scores)
