"""Evaluation: AUC, McClish pAUC, domain-conditioned AUC and the
per-section / dataset-level aggregation.

Two aggregation modes mirror the two official challenge metrics:

``harmonic``
    per section the source AUC, the target AUC (normal test samples of one
    domain against all anomalies) and the pAUC over all test samples;
    harmonic mean over every value of every section.
``arithmetic``
    per section one AUC and one pAUC over all test samples; arithmetic mean.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .core import DataError, Dataset, IntegrityError, ScoreVector

MODES = ("harmonic", "arithmetic")


def _split(scores, labels):
    if isinstance(scores, ScoreVector):
        if isinstance(labels, dict):
            labels = [labels[i] for i in scores.ids]
        scores = scores.scores
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    lab = np.asarray(labels).reshape(-1)
    if lab.shape != s.shape:
        raise DataError(f"{lab.size} labels for {s.size} scores")
    if lab.dtype.kind in "US":
        if np.any((lab != "normal") & (lab != "anomaly")):
            raise DataError("labels must be 'normal' or 'anomaly'")
        anomalous = lab == "anomaly"
    else:
        anomalous = lab.astype(bool)
    return s[~anomalous], s[anomalous]


def _check_two_class(normal, anomalous):
    if normal.size == 0 or anomalous.size == 0:
        raise DataError(
            f"AUC needs both classes; got {normal.size} normal and {anomalous.size} anomalous"
        )


def auc_from_groups(normal, anomalous) -> float:
    normal = np.asarray(normal, dtype=np.float64)
    anomalous = np.asarray(anomalous, dtype=np.float64)
    _check_two_class(normal, anomalous)
    ranks = rankdata(np.concatenate([anomalous, normal]))
    na, nn = anomalous.size, normal.size
    u = ranks[:na].sum() - na * (na + 1) / 2.0
    return float(u / (na * nn))


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(anomaly score > normal score), ties counted half.

    ``labels`` holds ``"normal"``/``"anomaly"`` strings or truthy values
    marking anomalies; with a ``ScoreVector`` it may be an id -> label dict.
    """
    return auc_from_groups(*_split(scores, labels))


def roc_points(normal, anomalous):
    """ROC vertices ``(fpr, tpr)`` from (0, 0) to (1, 1).

    Thresholds sweep the distinct scores in descending order; tied scores
    move both rates in one step.
    """
    s = np.concatenate([anomalous, normal])
    is_anom = np.concatenate([np.ones(len(anomalous)), np.zeros(len(normal))])
    order = np.argsort(-s, kind="stable")
    s, is_anom = s[order], is_anom[order]
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(is_anom)[last_of_group]
    fp = np.cumsum(1.0 - is_anom)[last_of_group]
    fpr = np.r_[0.0, fp / len(normal)]
    tpr = np.r_[0.0, tp / len(anomalous)]
    return fpr, tpr


def partial_area(fpr, tpr, p: float) -> float:
    """Area under the piecewise-linear ROC curve over FPR in [0, p]."""
    area = 0.0
    for x0, y0, x1, y1 in zip(fpr[:-1], tpr[:-1], fpr[1:], tpr[1:]):
        if x0 >= p:
            break
        if x1 == x0:
            continue
        xe = min(x1, p)
        ye = y0 + (y1 - y0) * (xe - x0) / (x1 - x0)
        area += (xe - x0) * (y0 + ye) / 2.0
    return area


def pauc_from_groups(normal, anomalous, p: float = 0.1, standardized: bool = True) -> float:
    normal = np.asarray(normal, dtype=np.float64)
    anomalous = np.asarray(anomalous, dtype=np.float64)
    _check_two_class(normal, anomalous)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if p == 1.0 and standardized:
        return auc_from_groups(normal, anomalous)
    raw = partial_area(*roc_points(normal, anomalous), p)
    if not standardized:
        return raw
    lo, hi = p * p / 2.0, p
    return 0.5 * (1.0 + (raw - lo) / (hi - lo))


def pauc(scores, labels, p: float = 0.1) -> float:
    """McClish-standardized partial AUC over false-positive rates in [0, p].

    Maps the chance-level partial area ``p**2 / 2`` to 0.5 and the maximum
    ``p`` to 1. ``p = 1`` returns ``auc`` exactly.
    """
    return pauc_from_groups(*_split(scores, labels), p=p)


def domain_conditioned_auc(scores, conditions, domains, domain: str) -> Optional[float]:
    """AUC of the normal samples of one domain against all anomalies.

    Returns ``None`` when the cell is empty (no normal sample of ``domain``
    or no anomaly at all).
    """
    s = np.asarray(scores, dtype=np.float64)
    cond = np.asarray(conditions)
    dom = np.asarray(domains)
    normal = s[(cond == "normal") & (dom == domain)]
    anomalous = s[cond == "anomaly"]
    if normal.size == 0 or anomalous.size == 0:
        return None
    return auc_from_groups(normal, anomalous)


def aggregate(values, mode: str = "harmonic") -> float:
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        raise ValueError("nothing to aggregate")
    if mode == "arithmetic":
        return float(v.mean())
    if mode == "harmonic":
        if np.any(v <= 0):
            raise ValueError("harmonic mean needs strictly positive values")
        return float(v.size / np.sum(1.0 / v))
    raise ValueError(f"unknown aggregation mode {mode!r}; expected one of {MODES}")


@dataclass(frozen=True)
class SectionResult:
    section: str
    auc: float
    auc_source: Optional[float]
    auc_target: Optional[float]
    pauc: float
    pauc_raw: float
    counts: dict = field(default_factory=dict)

    def values(self, mode: str) -> list:
        """The statistics that enter the dataset-level aggregate."""
        if mode == "harmonic":
            return [v for v in (self.auc_source, self.auc_target, self.pauc) if v is not None]
        return [self.auc, self.pauc]


@dataclass(frozen=True)
class EvaluationReport:
    sections: tuple
    aggregate: float
    aggregation: str
    p: float
    method: str = ""
    notes: tuple = ()

    def section(self, name: str) -> SectionResult:
        for s in self.sections:
            if s.section == name:
                return s
        raise KeyError(name)

    def section_mean(self, key: str) -> Optional[float]:
        """Arithmetic mean of one statistic (e.g. ``auc_target``) over sections."""
        vals = [getattr(s, key) for s in self.sections if getattr(s, key) is not None]
        if not vals:
            return None
        return float(np.mean(vals))

    def to_dict(self) -> dict:
        return {
            "aggregation": self.aggregation,
            "p": self.p,
            "method": self.method,
            "aggregate": self.aggregate,
            "notes": list(self.notes),
            "sections": [asdict(s) for s in self.sections],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        sections = tuple(SectionResult(**s) for s in d["sections"])
        return cls(sections, d["aggregate"], d["aggregation"], d["p"], d.get("method", ""), tuple(d.get("notes", ())))


def _test_metas(metas_or_ds):
    metas = metas_or_ds.metas if isinstance(metas_or_ds, Dataset) else tuple(metas_or_ds)
    return [m for m in metas if m.split == "test"]


def evaluate(metas_or_ds, scores: ScoreVector, p: float = 0.1, mode: str = "harmonic", method: str = "") -> EvaluationReport:
    """Per-section metrics over the test rows of a dataset plus the aggregate.

    Sections are reported in sorted order; the result does not depend on
    the order of rows or scores.
    """
    if mode not in MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}; expected one of {MODES}")
    tests = _test_metas(metas_or_ds)
    if not tests:
        raise DataError("no test samples to evaluate")
    lookup = scores.as_dict()
    missing = [m.id for m in tests if m.id not in lookup]
    if missing:
        raise IntegrityError(f"scores missing for {len(missing)} test samples: {missing[:5]}")
    unknown = [m.id for m in tests if m.condition == "unknown"]
    if unknown:
        raise DataError(f"{len(unknown)} test samples have unknown condition, e.g. {unknown[0]!r}")

    results = []
    for sec in sorted({m.section for m in tests}):
        rows = [m for m in tests if m.section == sec]
        s = np.array([lookup[m.id] for m in rows])
        cond = np.array([m.condition for m in rows])
        dom = np.array([m.domain for m in rows])
        normal, anomalous = s[cond == "normal"], s[cond == "anomaly"]
        counts = {
            f"{d}_{c}": int(np.sum((dom == d) & (cond == c)))
            for d in ("source", "target")
            for c in ("normal", "anomaly")
        }
        results.append(
            SectionResult(
                section=sec,
                auc=auc_from_groups(normal, anomalous),
                auc_source=domain_conditioned_auc(s, cond, dom, "source"),
                auc_target=domain_conditioned_auc(s, cond, dom, "target"),
                pauc=pauc_from_groups(normal, anomalous, p),
                pauc_raw=pauc_from_groups(normal, anomalous, p, standardized=False),
                counts=counts,
            )
        )
    values = [v for r in results for v in r.values(mode)]
    notes = ()
    if mode == "harmonic":
        notes = ("mixed-domain aggregate: harmonic mean of auc_source, auc_target and pauc over all sections",)
    return EvaluationReport(tuple(results), aggregate(values, mode), mode, p, method, notes)
