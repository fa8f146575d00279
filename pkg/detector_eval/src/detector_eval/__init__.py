"""Downstream detector evaluation over synthesized log datasets."""

from .data import (Experiment, InsufficientData, Record, SchemaMismatch,
                   Vocabulary, build_degradation_experiment, load_records)
from .evaluate import (EvalConfig, EvalReport, ModelComparison, Scores,
                       degradation_report, evaluate, evaluate_experiment,
                       scores_from_predictions)
from .models import MODEL_FAMILIES, fit_predict

__all__ = [
    "Experiment", "InsufficientData", "Record", "SchemaMismatch",
    "Vocabulary", "build_degradation_experiment", "load_records",
    "EvalConfig", "EvalReport", "ModelComparison", "Scores",
    "degradation_report", "evaluate", "evaluate_experiment",
    "scores_from_predictions",
    "MODEL_FAMILIES", "fit_predict",
]
