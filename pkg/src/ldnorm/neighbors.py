"""Exact nearest-neighbor structures over a reference set (brute force)."""

from dataclasses import dataclass

import numpy as np

from .core import DataError, as_embeddings, as_vector, digest
from .geometry import metric_code, pairwise_distances


@dataclass(frozen=True)
class NeighborTable:
    """For every reference row, all other rows sorted by distance.

    ``order[i]`` lists the ``n - 1`` other row indices by ascending distance
    to row ``i`` (ties by ascending index); ``dist[i]`` holds the matching
    distances. Row ``i`` itself never appears in its own list, although
    duplicates of it do, at distance 0.
    """

    order: np.ndarray
    dist: np.ndarray
    metric: str
    fingerprint: str

    @property
    def n(self) -> int:
        return self.order.shape[0]

    def kth_distance(self, k: int) -> np.ndarray:
        """Distance of every row to its k-th nearest other row (1-based)."""
        if not 1 <= k <= self.n - 1:
            raise ValueError(f"k={k} outside [1, {self.n - 1}]")
        return self.dist[:, k - 1]


def _sorted_without_self(d: np.ndarray):
    n = d.shape[0]
    order = np.empty((n, n - 1), dtype=np.int64)
    dist = np.empty((n, n - 1))
    others = np.arange(n)
    for i in range(n):
        idx = np.delete(others, i)
        row = d[i, idx]
        perm = np.argsort(row, kind="stable")
        order[i] = idx[perm]
        dist[i] = row[perm]
    return order, dist


def build_neighbor_table(refs, metric: str = "cosine") -> NeighborTable:
    refs = as_embeddings(refs, "references")
    metric_code(metric)
    if refs.shape[0] < 2:
        raise DataError(f"a neighbor table needs at least 2 references, got {refs.shape[0]}")
    order, dist = _sorted_without_self(pairwise_distances(refs, refs, metric))
    order.setflags(write=False)
    dist.setflags(write=False)
    return NeighborTable(order, dist, metric, digest(refs, metric))


def knn_query(refs, metric: str, q, k: int):
    """The ``k`` nearest reference rows to ``q`` as ``(indices, distances)``.

    Exact; ties are broken by ascending row index, so the answer for ``k``
    is always a prefix of the answer for ``k + 1``.
    """
    refs = as_embeddings(refs, "references")
    q = as_vector(q, "query")
    if not 1 <= k <= refs.shape[0]:
        raise ValueError(f"k={k} outside [1, {refs.shape[0]}]")
    row = pairwise_distances(q[None, :], refs, metric)[0]
    perm = np.argsort(row, kind="stable")[:k]
    return perm, row[perm]
