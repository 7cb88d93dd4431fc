"""Distance kernels.

Two dissimilarities are supported:

* ``cosine``: ``0.5 * (1 - <x, y> / (|x| |y|))``, in [0, 1];
* ``squared_euclidean``: mean of squared coordinate differences (MSE).

All inner products and squared sums go through one compiled routine with a
fixed 8-lane accumulation order, so a distance is bit-for-bit the same
whether it is computed alone, inside ``pairwise_distances`` or inside the
fused nearest-neighbor reductions used for scoring. BLAS is deliberately
avoided: its summation order depends on matrix shape.
"""

import numba as nb
import numpy as np

from .core import METRICS, DataError, as_embeddings, as_vector

COSINE = 0
SQ_EUCLIDEAN = 1

# reduction modes for nearest_reduce
RAW = 0
RATIO = 1
DIFF = 2


def metric_code(metric: str) -> int:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return COSINE if metric == "cosine" else SQ_EUCLIDEAN


@nb.njit(inline="always", cache=True)
def _dot(x, y):
    d = x.shape[0]
    a0 = a1 = a2 = a3 = a4 = a5 = a6 = a7 = 0.0
    j = 0
    while j + 8 <= d:
        a0 += x[j] * y[j]
        a1 += x[j + 1] * y[j + 1]
        a2 += x[j + 2] * y[j + 2]
        a3 += x[j + 3] * y[j + 3]
        a4 += x[j + 4] * y[j + 4]
        a5 += x[j + 5] * y[j + 5]
        a6 += x[j + 6] * y[j + 6]
        a7 += x[j + 7] * y[j + 7]
        j += 8
    while j < d:
        a0 += x[j] * y[j]
        j += 1
    return ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))


@nb.njit(inline="always", cache=True)
def _sq_diff_mean(x, y):
    d = x.shape[0]
    a0 = a1 = a2 = a3 = a4 = a5 = a6 = a7 = 0.0
    j = 0
    while j + 8 <= d:
        t0 = x[j] - y[j]
        t1 = x[j + 1] - y[j + 1]
        t2 = x[j + 2] - y[j + 2]
        t3 = x[j + 3] - y[j + 3]
        t4 = x[j + 4] - y[j + 4]
        t5 = x[j + 5] - y[j + 5]
        t6 = x[j + 6] - y[j + 6]
        t7 = x[j + 7] - y[j + 7]
        a0 += t0 * t0
        a1 += t1 * t1
        a2 += t2 * t2
        a3 += t3 * t3
        a4 += t4 * t4
        a5 += t5 * t5
        a6 += t6 * t6
        a7 += t7 * t7
        j += 8
    while j < d:
        t0 = x[j] - y[j]
        a0 += t0 * t0
        j += 1
    return (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) / d


@nb.njit(inline="always", cache=True)
def _pair(x, y, xx, yy, metric):
    # xx, yy: squared norms. sqrt(xx * yy) rather than sqrt(xx) * sqrt(yy)
    # makes identical inputs give exactly 0.
    if metric == 0:
        c = _dot(x, y) / np.sqrt(xx * yy)
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        return 0.5 * (1.0 - c)
    return _sq_diff_mean(x, y)


@nb.njit(cache=True)
def _row_sq_norms(a):
    out = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        out[i] = _dot(a[i], a[i])
    return out


@nb.njit(cache=True)
def _pairwise(a, b, aa, bb, metric):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _pair(a[i], b[j], aa[i], bb[j], metric)
    return out


@nb.njit(cache=True)
def _nearest_reduce(q, r, qq, rr, metric, c, mode):
    n = q.shape[0]
    best = np.empty(n)
    arg = np.empty(n, dtype=np.int64)
    for i in range(n):
        b = np.inf
        a = -1
        for j in range(r.shape[0]):
            v = _pair(q[i], r[j], qq[i], rr[j], metric)
            if mode == 1:
                v = v / c[j]
            elif mode == 2:
                v = v - c[j]
            if v < b:
                b = v
                a = j
        best[i] = b
        arg[i] = a
    return best, arg


def row_sq_norms(m: np.ndarray, metric: str = "cosine", name: str = "embeddings") -> np.ndarray:
    """Squared Euclidean row norms as the kernels consume them.

    For cosine, zero-norm rows raise ``DataError``. Returns zeros for
    ``squared_euclidean``, which never reads them.
    """
    if metric_code(metric) == SQ_EUCLIDEAN:
        return np.zeros(m.shape[0])
    norms = _row_sq_norms(m)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(f"{name}: row {zero[0]} has zero norm; cosine distance is undefined")
    return norms


def cosine_distance(x, y) -> float:
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise DataError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    xx = _dot(x, x)
    yy = _dot(y, y)
    if xx == 0.0:
        raise DataError("x has zero norm; cosine distance is undefined")
    if yy == 0.0:
        raise DataError("y has zero norm; cosine distance is undefined")
    return float(_pair(x, y, xx, yy, COSINE))


def sq_euclidean(x, y) -> float:
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise DataError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(_sq_diff_mean(x, y))


def distance(x, y, metric: str = "cosine") -> float:
    return cosine_distance(x, y) if metric_code(metric) == COSINE else sq_euclidean(x, y)


def unit_normalize(m) -> np.ndarray:
    """Scale every row to unit Euclidean norm."""
    m = as_embeddings(m)
    norms = np.linalg.norm(m, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(f"row {zero[0]} has zero norm and cannot be normalized")
    return m / norms[:, None]


def pairwise_distances(a, b, metric: str = "cosine") -> np.ndarray:
    """``|a| x |b|`` matrix of the scalar kernel applied to every row pair."""
    a = as_embeddings(a, "a")
    b = as_embeddings(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DataError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    code = metric_code(metric)
    an = row_sq_norms(a, metric, "a")
    bn = row_sq_norms(b, metric, "b")
    return _pairwise(a, b, an, bn, code)


def nearest_reduce(q, r, metric="cosine", *, q_sq=None, r_sq=None, c=None, mode=RAW):
    """Per query row, the minimum over reference rows of a transformed distance.

    ``mode`` selects ``RAW`` (plain distance), ``RATIO`` (``dist / c[j]``) or
    ``DIFF`` (``dist - c[j]``). Returns ``(values, argmin)``; ties go to the
    lowest reference index. Each query row is reduced independently, so the
    result for a row never depends on the other rows in ``q``.
    """
    code = metric_code(metric)
    q = as_embeddings(q, "queries")
    r = as_embeddings(r, "references")
    if q.shape[1] != r.shape[1]:
        raise DataError(f"dimension mismatch: {q.shape[1]} vs {r.shape[1]}")
    if q_sq is None:
        q_sq = row_sq_norms(q, metric, "queries")
    if r_sq is None:
        r_sq = row_sq_norms(r, metric, "references")
    if c is None:
        if mode != RAW:
            raise ValueError("ratio/difference reduction needs constants")
        c = np.ones(r.shape[0])
    c = np.ascontiguousarray(c, dtype=np.float64)
    return _nearest_reduce(q, r, q_sq, r_sq, code, c, mode)
