"""Evaluation harness: precision/recall/F1 with and without augmentation.

Both conditions share one test split, models, seeds, and epochs; the only
difference is whether the augmentation records join the training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import (Experiment, Vocabulary, assert_test_isolation,
                   build_degradation_experiment, load_records, merge_training)
from .models import MODEL_FAMILIES, fit_predict


@dataclass
class EvalConfig:
    baseline_path: str
    augmentation_path: str
    model: str = "all"            # family name or "all"
    split_seed: int = 0
    epochs: int = 12
    n_baseline: int = 400

    def families(self) -> list[str]:
        if self.model == "all":
            return list(MODEL_FAMILIES)
        if self.model not in MODEL_FAMILIES:
            raise ValueError(f"unknown model family {self.model!r}")
        return [self.model]


@dataclass
class Scores:
    precision: float
    recall: float
    f1: float


@dataclass
class ModelComparison:
    family: str
    baseline: Scores
    augmented: Scores

    @property
    def f1_delta(self) -> float:
        return self.augmented.f1 - self.baseline.f1


@dataclass
class EvalReport:
    comparisons: list[ModelComparison] = field(default_factory=list)
    removed_families: list[str] = field(default_factory=list)

    def table(self) -> str:
        lines = [
            f"{'':14s}  {'F1-Score':>17s}  {'Precision':>17s}  {'Recall':>17s}",
            f"{'':14s}  {'(without/with)':>17s}  {'(without/with)':>17s}"
            f"  {'(without/with)':>17s}",
        ]
        for c in self.comparisons:
            lines.append(
                f"{c.family:14s}  {c.baseline.f1:>8.3f}/{c.augmented.f1:<8.3f}"
                f"  {c.baseline.precision:>8.3f}/{c.augmented.precision:<8.3f}"
                f"  {c.baseline.recall:>8.3f}/{c.augmented.recall:<8.3f}")
        return "\n".join(lines)


def scores_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> Scores:
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return Scores(precision=precision, recall=recall, f1=f1)


def _evaluate_family(family: str, experiment: Experiment, seed: int,
                     epochs: int) -> ModelComparison:
    vocab = Vocabulary.build(experiment.train_augmented + experiment.test)
    y_true = np.array([int(r.anomalous) for r in experiment.test])
    base_pred = fit_predict(family, experiment.train_baseline,
                            experiment.test, vocab, seed, epochs)
    aug_pred = fit_predict(family, experiment.train_augmented,
                           experiment.test, vocab, seed, epochs)
    return ModelComparison(
        family=family,
        baseline=scores_from_predictions(y_true, base_pred),
        augmented=scores_from_predictions(y_true, aug_pred),
    )


def evaluate_experiment(experiment: Experiment, families: list[str],
                        seed: int, epochs: int = 12) -> EvalReport:
    assert_test_isolation(experiment)
    report = EvalReport(removed_families=list(experiment.removed_families))
    for family in families:
        report.comparisons.append(
            _evaluate_family(family, experiment, seed, epochs))
    return report


def evaluate(config: EvalConfig) -> EvalReport:
    """Load both datasets, build a shared test split, and compare each
    selected model family trained without and with the augmentation."""
    baseline = load_records(config.baseline_path)
    augmentation = load_records(config.augmentation_path)
    rng_order = sorted(baseline, key=lambda r: r.record_id)
    import random
    random.Random(config.split_seed).shuffle(rng_order)
    half = len(rng_order) // 2
    test, train = rng_order[:half], rng_order[half:]
    # augmentation never reaches the test split: records sharing a test id
    # stay out of training entirely (self-augmentation becomes a no-op)
    test_ids = {r.record_id for r in test}
    usable = [r for r in augmentation if r.record_id not in test_ids]
    experiment = Experiment(
        train_baseline=train,
        train_augmented=merge_training(train, usable),
        test=test,
    )
    return evaluate_experiment(experiment, config.families(),
                               config.split_seed, config.epochs)


def degradation_report(augmentation_path: str, seed: int,
                       families: Optional[list[str]] = None,
                       epochs: int = 12, n_baseline: int = 400) -> EvalReport:
    """The constructed experiment: degraded baseline vs. the same baseline
    augmented with the full synthesized dataset."""
    augmentation = load_records(augmentation_path)
    experiment = build_degradation_experiment(augmentation, seed, n_baseline)
    return evaluate_experiment(
        experiment, families or ["recurrent", "convolutional", "attention"],
        seed, epochs)
