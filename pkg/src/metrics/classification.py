"""Classification metrics: top-1 accuracy and mean average precision.

- accuracy: ties in argmax go to the lowest class index.
- average precision: precision averaged at the ranks of the positives (no interpolation), examples
  ranked by descending score with ties kept in input order.
- mAP: unweighted mean of AP over classes that have at least one positive.
"""

from __future__ import annotations

from typing import Dict, List, Optional

import numpy as np


class MetricError(ValueError):
    """Metric inputs are inconsistent with the metric's definition."""


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise MetricError(f"accuracy needs single-label class ids, got labels of shape {labels.shape}")
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise MetricError(f"logits {logits.shape} do not match {labels.shape[0]} labels")
    if labels.size == 0:
        raise MetricError("accuracy of an empty batch is undefined")
    # np.argmax returns the first maximal index.
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def average_precision(scores: np.ndarray, positives: np.ndarray) -> Optional[float]:
    """AP of one class; None when the class has no positives."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives).astype(bool)
    n_pos = int(positives.sum())
    if n_pos == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    ranks = np.flatnonzero(hits) + 1
    precision_at_hits = np.cumsum(hits)[hits] / ranks
    return float(precision_at_hits.sum() / n_pos)


def per_class_average_precision(scores: np.ndarray, labels: np.ndarray) -> List[Optional[float]]:
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise MetricError(f"scores {scores.shape} and multi-hot labels {labels.shape} must be equal (N, C)")
    return [average_precision(scores[:, c], labels[:, c]) for c in range(scores.shape[1])]


def mean_average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    aps = [ap for ap in per_class_average_precision(scores, labels) if ap is not None]
    if not aps:
        raise MetricError("mean average precision needs at least one positive label")
    return float(np.mean(aps))


def task_metric(logits: np.ndarray, labels: np.ndarray, *, multilabel: bool) -> Dict[str, float]:
    """The reported metric for a task: mAP for multilabel tasks, accuracy otherwise."""
    if multilabel:
        return {"map": mean_average_precision(logits, labels)}
    return {"accuracy": accuracy(logits, labels)}
