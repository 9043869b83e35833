"""Ground-truth quality, correlation-based evaluation and synthetic reviews."""

from .compare import compare_models
from .correlation import (
    CorrelationResult,
    evaluate_estimator,
    group_coefficients,
    pearson,
    significance_test,
    spearman,
    subsample_groups,
)
from .metrics import EvaluationError, QualityScore, average_precision, sr_quality
from .synth import SynthConfig, broadness_families, synth_background_counts, synth_embeddings, synth_generate

__all__ = [
    "CorrelationResult",
    "EvaluationError",
    "QualityScore",
    "SynthConfig",
    "broadness_families",
    "average_precision",
    "compare_models",
    "evaluate_estimator",
    "group_coefficients",
    "pearson",
    "significance_test",
    "spearman",
    "sr_quality",
    "subsample_groups",
    "synth_background_counts",
    "synth_embeddings",
    "synth_generate",
]
