"""Data model shared by every other module.

Embeddings are plain ``float64`` numpy arrays of shape ``(n, d)``; the
helpers here coerce and check them. Per-row labels live in ``SampleMeta``
records and travel together with the embeddings in a ``Dataset``.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DOMAINS = ("source", "target", "unknown")
SPLITS = ("train", "test")
CONDITIONS = ("normal", "anomaly", "unknown")

METHODS = (
    "baseline_nn",
    "baseline_knn_mean",
    "source_means",
    "smote",
    "lof",
    "standardization",
    "norm_ratio",
    "norm_diff",
    "ensemble_mean",
)
METRICS = ("cosine", "squared_euclidean")
# methods whose score for one test sample depends on the rest of the batch
BATCH_DEPENDENT = frozenset({"standardization"})


class DataError(ValueError):
    """Input data violates a structural invariant."""


class IntegrityError(DataError):
    """Cached artifact no longer matches the data it was computed from."""


def as_embeddings(data, name: str = "embeddings") -> np.ndarray:
    """Return ``data`` as a C-contiguous ``(n, d)`` float64 array.

    Raises ``DataError`` on wrong rank, empty shape or non-finite entries.
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{name}: expected a 2-D array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name}: empty shape {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"{name}: non-finite value at row {r}, column {c}")
    return arr


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DataError(f"{name}: expected a non-empty 1-D vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class SampleMeta:
    id: str
    section: str
    domain: str = "unknown"
    split: str = "train"
    condition: str = "normal"

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise DataError(f"sample {self.id!r}: unknown domain {self.domain!r}")
        if self.split not in SPLITS:
            raise DataError(f"sample {self.id!r}: unknown split {self.split!r}")
        if self.condition not in CONDITIONS:
            raise DataError(f"sample {self.id!r}: unknown condition {self.condition!r}")


@dataclass(frozen=True)
class Dataset:
    """Embeddings plus row-aligned metadata.

    Construction only checks that the lengths agree; call
    ``validate_dataset`` for the full list of invariant violations.
    """

    embeddings: np.ndarray
    metas: tuple

    def __post_init__(self):
        emb = np.array(self.embeddings, dtype=np.float64, order="C", copy=True)
        if emb.ndim != 2:
            raise DataError(f"embeddings must be 2-D, got shape {emb.shape}")
        emb.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "metas", tuple(self.metas))
        if len(self.metas) != emb.shape[0]:
            raise DataError(
                f"{len(self.metas)} metadata records for {emb.shape[0]} embedding rows"
            )

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    @property
    def ids(self) -> tuple:
        return tuple(m.id for m in self.metas)

    def sections(self) -> list:
        """Section names in sorted order."""
        return sorted({m.section for m in self.metas})

    def rows(self, section=None, split=None, domain=None, condition=None) -> np.ndarray:
        """Row indices matching every given filter, ascending."""
        keep = [
            i
            for i, m in enumerate(self.metas)
            if (section is None or m.section == section)
            and (split is None or m.split == split)
            and (domain is None or m.domain == domain)
            and (condition is None or m.condition == condition)
        ]
        return np.asarray(keep, dtype=np.int64)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.embeddings[rows], tuple(self.metas[i] for i in rows))


def validate_dataset(ds: Dataset, require_labels: bool = False) -> list:
    """List every invariant violation of ``ds`` as a human-readable string.

    An empty list means the dataset is fit for scoring. With
    ``require_labels`` test rows must also carry a known condition, which
    evaluation needs.
    """
    problems = []
    emb = ds.embeddings
    if emb.shape[0] < 1 or emb.shape[1] < 1:
        problems.append(f"empty embedding matrix of shape {emb.shape}")
    for r, c in np.argwhere(~np.isfinite(emb)):
        problems.append(f"row {r}, column {c}: non-finite value {emb[r, c]!r}")

    seen = {}
    for i, m in enumerate(ds.metas):
        if m.id in seen:
            problems.append(f"row {i}: duplicate id {m.id!r} (first at row {seen[m.id]})")
        else:
            seen[m.id] = i
        if m.split == "train" and m.condition != "normal":
            problems.append(f"row {i}: train sample {m.id!r} has condition {m.condition!r}")
        if require_labels and m.split == "test" and m.condition == "unknown":
            problems.append(f"row {i}: test sample {m.id!r} has unknown condition")

    train_sections = {m.section for m in ds.metas if m.split == "train"}
    test_sections = {m.section for m in ds.metas if m.split == "test"}
    for s in sorted(test_sections - train_sections):
        problems.append(f"section {s!r} has test samples but no train samples")
    return problems


@dataclass(frozen=True)
class Density:
    """Local-density definition: ``knn`` with ``k`` or ``gwrp`` with ``r``."""

    kind: str = "knn"
    k: int = 1
    r: float = 0.0

    def __post_init__(self):
        if self.kind == "knn":
            if int(self.k) != self.k or self.k < 1:
                raise ValueError(f"knn density needs a positive integer K, got {self.k!r}")
        elif self.kind == "gwrp":
            if not 0.0 <= self.r <= 1.0:
                raise ValueError(f"gwrp weight r must lie in [0, 1], got {self.r!r}")
        else:
            raise ValueError(f"unknown density kind {self.kind!r}")

    @classmethod
    def knn(cls, k: int = 1) -> "Density":
        return cls("knn", k=int(k))

    @classmethod
    def gwrp(cls, r: float = 0.0) -> "Density":
        return cls("gwrp", r=float(r))

    def label(self) -> str:
        return f"knn:{self.k}" if self.kind == "knn" else f"gwrp:{self.r!r}"

    @classmethod
    def parse(cls, text: str) -> "Density":
        kind, _, value = text.partition(":")
        return cls.knn(int(value)) if kind == "knn" else cls.gwrp(float(value))


@dataclass(frozen=True)
class MethodConfig:
    """Scoring method and its hyperparameters.

    Only the fields relevant to ``method`` are read: ``k`` for
    ``baseline_knn_mean``, ``k_clusters`` for ``source_means``,
    ``smote_neighbors``/``oversample_to`` for ``smote``, ``lof_k`` for
    ``lof``, ``density`` for the normalized scores and ``members`` for
    ``ensemble_mean``.
    """

    method: str = "norm_ratio"
    metric: str = "cosine"
    density: Density = field(default_factory=Density)
    k: int = 1
    k_clusters: int = 16
    smote_neighbors: int = 4
    oversample_to: Optional[int] = None
    lof_k: int = 1
    seed: int = 0
    members: Sequence["MethodConfig"] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        for name in ("k", "k_clusters", "smote_neighbors", "lof_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        object.__setattr__(self, "members", tuple(self.members))
        if self.method == "ensemble_mean" and not self.members:
            raise ValueError("ensemble_mean needs at least one member config")

    @property
    def batch_dependent(self) -> bool:
        if self.method == "ensemble_mean":
            return any(m.batch_dependent for m in self.members)
        return self.method in BATCH_DEPENDENT

    @property
    def caveats(self) -> tuple:
        """Human-readable warnings about configurations outside the well-trodden path."""
        if self.method == "ensemble_mean":
            return tuple(c for m in self.members for c in m.caveats)
        if self.method == "norm_diff" and self.density.kind == "gwrp":
            return ("difference variant with a gwrp density is an extrapolation; treat its results as exploratory",)
        if self.method == "lof" and self.lof_k == 1:
            return ("LOF with k=1 is degenerate: every reachability distance is a plain 1-NN distance",)
        return ()

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "metric": self.metric,
            "density": self.density.label(),
            "k": self.k,
            "k_clusters": self.k_clusters,
            "smote_neighbors": self.smote_neighbors,
            "oversample_to": self.oversample_to,
            "lof_k": self.lof_k,
            "seed": self.seed,
        }
        if self.members:
            out["members"] = [m.to_dict() for m in self.members]
        if self.caveats:
            out["caveats"] = list(self.caveats)
        return out


@dataclass(frozen=True)
class ScoreVector:
    """Anomaly scores keyed by sample id; larger means more anomalous."""

    ids: tuple
    scores: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        scores = np.array(self.scores, dtype=np.float64).reshape(-1)
        if len(ids) != scores.size:
            raise DataError(f"{len(ids)} ids for {scores.size} scores")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate ids in score vector")
        if not np.all(np.isfinite(scores)):
            raise DataError("score vector contains non-finite values")
        scores.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, ScoreVector):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.scores, other.scores)

    def as_dict(self) -> dict:
        return dict(zip(self.ids, self.scores.tolist()))

    def reindex(self, ids) -> "ScoreVector":
        """Scores reordered to ``ids``; raises ``DataError`` on missing ids."""
        lookup = {i: k for k, i in enumerate(self.ids)}
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise DataError(f"{len(missing)} ids missing from scores, e.g. {missing[0]!r}")
        return ScoreVector(tuple(ids), self.scores[[lookup[i] for i in ids]])


def digest(*parts) -> str:
    """SHA-256 hex digest over arrays (shape and bytes) and strings."""
    import hashlib

    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            a = np.ascontiguousarray(p)
            h.update(f"{a.dtype.str}{a.shape}".encode())
            h.update(a.tobytes())
        else:
            h.update(str(p).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()
