"""Comparison methods: k-means source means, SMOTE, LOF, domain-wise
standardization.

All of them except LOF need domain labels for the reference samples, and
standardization additionally needs the whole test batch at once.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import DataError, ScoreVector, as_embeddings, as_vector
from .geometry import RAW, nearest_reduce, pairwise_distances
from .neighbors import build_neighbor_table
from .rng import Rng, derive_seed

EPS = 1e-12


def row_mean(a: np.ndarray) -> np.ndarray:
    # sequential sum along rows: identical for a row alone or inside a batch
    return np.cumsum(a, axis=1)[:, -1] / a.shape[1]


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KMeansModel:
    means: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple = field(default=())


def _sq_dists(x, centers):
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    chosen = [rng.integers(n)]
    d2 = _sq_dists(x, x[chosen[-1]][None, :])[:, 0]
    for _ in range(1, k):
        chosen.append(rng.weighted_index(d2))
        d2 = np.minimum(d2, _sq_dists(x, x[chosen[-1]][None, :])[:, 0])
    return x[chosen].copy()


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 300) -> KMeansModel:
    """Lloyd's algorithm with k-means++ seeding on squared Euclidean distance.

    Iterates until the assignment stops changing or ``max_iter`` updates.
    An empty cluster takes over the point farthest from its current
    centroid. With ``k >= n`` every point becomes its own mean.
    """
    x = as_embeddings(points, "points")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = x.shape[0]
    if k >= n:
        return KMeansModel(x.copy(), np.arange(n), 0.0, 0, (0.0,))

    rng = Rng(derive_seed(seed, "kmeans++"))
    means = _kmeans_pp(x, k, rng)
    prev = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(x, means)
        assign = np.argmin(d2, axis=1)
        if prev is not None and np.array_equal(assign, prev):
            n_iter -= 1
            break
        counts = np.bincount(assign, minlength=k)
        if np.any(counts == 0):
            own = d2[np.arange(n), assign]
            taken = set()
            for j in np.flatnonzero(counts == 0):
                # farthest point that is not the only member of its cluster
                for i in np.argsort(-own, kind="stable"):
                    if i not in taken and counts[assign[i]] > 1:
                        break
                counts[assign[i]] -= 1
                counts[j] += 1
                assign[i] = j
                taken.add(i)
        means = np.stack([x[assign == j].mean(axis=0) for j in range(k)])
        history.append(float(_sq_dists(x, means)[np.arange(n), assign].sum()))
        prev = assign
    inertia = float(_sq_dists(x, means)[np.arange(n), prev].sum())
    return KMeansModel(means, prev, inertia, n_iter, tuple(history))


def _split_domains(refs, domains, method):
    refs = as_embeddings(refs, "references")
    domains = np.asarray(domains)
    if domains.shape != (refs.shape[0],):
        raise DataError(f"{method}: need one domain label per reference row")
    if np.any((domains != "source") & (domains != "target")):
        raise DataError(f"{method} requires source/target domain labels for every reference")
    return refs[domains == "source"], refs[domains == "target"]


def source_means_references(refs, domains, k: int = 16, seed: int = 0) -> np.ndarray:
    """k-means centroids of the source references stacked on the raw target references."""
    source, target = _split_domains(refs, domains, "source_means")
    if source.shape[0] == 0:
        raise DataError("source_means: no source-domain references")
    means = kmeans_fit(source, k, seed).means
    return np.vstack([means, target])


def score_source_means(q, refs, domains, k: int = 16, metric: str = "cosine", seed: int = 0) -> float:
    q = as_vector(q, "query")
    aug = source_means_references(refs, domains, k, seed)
    return float(nearest_reduce(q[None, :], aug, metric, mode=RAW)[0][0])


# --------------------------------------------------------------------------
# SMOTE
# --------------------------------------------------------------------------


def smote_oversample(
    target_refs,
    n_neighbors: int = 4,
    oversample_to=None,
    seed: int = 0,
    metric: str = "cosine",
    return_origins: bool = False,
):
    """Grow ``target_refs`` to ``oversample_to`` rows by SMOTE interpolation.

    Each synthetic row is ``p + lam * (q - p)`` for a uniformly drawn
    original row ``p``, one of its ``n_neighbors`` nearest originals ``q``
    and ``lam`` uniform in [0, 1). The originals come first in the output.

    With ``return_origins`` also returns an ``(m, 2)`` array of the
    ``(p, q)`` row indices and the ``m`` interpolation weights.
    """
    t = as_embeddings(target_refs, "target references")
    n = t.shape[0]
    if n < 2:
        raise DataError(f"SMOTE needs at least 2 target references, got {n}")
    if not 1 <= n_neighbors <= n - 1:
        raise DataError(f"SMOTE n_neighbors={n_neighbors} outside [1, {n - 1}]")
    total = n if oversample_to is None else int(oversample_to)
    if total < n:
        raise ValueError(f"oversample_to={total} is below the {n} existing rows")
    m = total - n

    rng = Rng(derive_seed(seed, "smote"))
    table = build_neighbor_table(t, metric)
    base = rng.integers(n, size=m)
    pick = rng.integers(n_neighbors, size=m)
    lam = rng.uniform(m)
    other = table.order[base, pick]
    synth = t[base] + lam[:, None] * (t[other] - t[base])
    out = np.vstack([t, synth])
    if return_origins:
        return out, np.stack([base, other], axis=1), lam
    return out


def smote_references(refs, domains, n_neighbors: int = 4, oversample_to=None, seed: int = 0, metric="cosine"):
    """Source references plus target references oversampled to the source count."""
    source, target = _split_domains(refs, domains, "smote")
    goal = source.shape[0] if oversample_to is None else oversample_to
    goal = max(goal, target.shape[0])
    return np.vstack([source, smote_oversample(target, n_neighbors, goal, seed, metric)])


def score_smote(q, refs, domains, n_neighbors=4, oversample_to=None, metric="cosine", seed=0) -> float:
    q = as_vector(q, "query")
    aug = smote_references(refs, domains, n_neighbors, oversample_to, seed, metric)
    return float(nearest_reduce(q[None, :], aug, metric, mode=RAW)[0][0])


# --------------------------------------------------------------------------
# LOF
# --------------------------------------------------------------------------


class LofModel:
    """Local outlier factor against a fixed reference set.

    Reference densities are computed leave-one-out inside the reference
    set; a query is never inserted into it. Exactly ``k`` neighbors are
    used (ties by row index), not the tie-extended k-distance
    neighborhood of the original LOF definition.
    """

    def __init__(self, refs, k: int = 1, metric: str = "cosine"):
        refs = as_embeddings(refs, "references")
        n = refs.shape[0]
        if not 1 <= k <= n - 1:
            raise DataError(f"LOF k={k} outside [1, {n - 1}] for {n} references")
        self.refs = refs
        self.k = k
        self.metric = metric
        table = build_neighbor_table(refs, metric)
        self.k_distance = table.dist[:, k - 1].copy()
        nbrs = table.order[:, :k]
        reach = np.maximum(self.k_distance[nbrs], table.dist[:, :k])
        mean_reach = row_mean(reach)
        self.degenerate = mean_reach <= EPS
        self.lrd = 1.0 / np.maximum(mean_reach, EPS)

    def score(self, queries, return_flags: bool = False):
        q = as_embeddings(queries, "queries")
        d = pairwise_distances(q, self.refs, self.metric)
        nn = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        dq = np.take_along_axis(d, nn, axis=1)
        reach = np.maximum(self.k_distance[nn], dq)
        mean_reach = row_mean(reach)
        flags = mean_reach <= EPS
        lrd_q = 1.0 / np.maximum(mean_reach, EPS)
        lof = row_mean(self.lrd[nn]) / lrd_q
        if return_flags:
            return lof, flags
        return lof


def lof_score(q, refs, k: int = 1, metric: str = "cosine") -> float:
    q = as_vector(q, "query")
    return float(LofModel(refs, k, metric).score(q[None, :])[0])


# --------------------------------------------------------------------------
# Domain-wise standardization
# --------------------------------------------------------------------------


def _zscore(s):
    std = s.std()
    return (s - s.mean()) / max(std, EPS)


def standardize_scores_domainwise(vs_source: ScoreVector, vs_target: ScoreVector) -> ScoreVector:
    """Z-score each population over the whole batch, then take the minimum.

    The output for one sample depends on every other sample in the batch.
    """
    if set(vs_source.ids) != set(vs_target.ids):
        raise DataError("source and target score vectors cover different ids")
    vs_target = vs_target.reindex(vs_source.ids)
    z = np.minimum(_zscore(vs_source.scores), _zscore(vs_target.scores))
    return ScoreVector(vs_source.ids, z)


def score_standardized(tests, refs, domains, metric: str = "cosine") -> np.ndarray:
    """Batch scores: nearest distance to each domain, standardized, then min."""
    source, target = _split_domains(refs, domains, "standardization")
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise DataError("standardization needs both source and target references")
    tests = as_embeddings(tests, "tests")
    ids = tuple(str(i) for i in range(tests.shape[0]))
    s_src = ScoreVector(ids, nearest_reduce(tests, source, metric)[0])
    s_tgt = ScoreVector(ids, nearest_reduce(tests, target, metric)[0])
    return standardize_scores_domainwise(s_src, s_tgt).scores.copy()
