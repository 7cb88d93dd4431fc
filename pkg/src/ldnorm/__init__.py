"""Nearest-neighbor anomaly scoring with local-density normalization.

Distances from a test embedding to a set of normal reference embeddings are
rescaled by how densely each reference is surrounded by its own neighbors,
so that a single decision threshold works for well-sampled (source) and
sparsely-sampled (target) domains alike.
"""

from .core import Dataset, DataError, Density, IntegrityError, MethodConfig, SampleMeta, ScoreVector, validate_dataset
from .geometry import cosine_distance, pairwise_distances, sq_euclidean, unit_normalize
from .metrics import EvaluationReport, aggregate, auc, domain_conditioned_auc, evaluate, pauc
from .neighbors import build_neighbor_table, knn_query
from .scoring import (
    NormalizationConstants,
    ReferenceIndex,
    build_index,
    ensemble_mean,
    precompute_constants,
    score_baseline_knn_mean,
    score_baseline_nn,
    score_batch,
    score_dataset,
    score_normalized,
)
from .synth import SynthConfig, generate, sweep

__version__ = "0.1.0"
