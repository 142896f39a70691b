"""Evaluation metrics for classification tasks.

Starting point: see `src/metrics/README.md`.
"""

__all__ = [
    "MetricError",
    "accuracy",
    "average_precision",
    "mean_average_precision",
    "per_class_average_precision",
    "task_metric",
]

from .classification import (
    MetricError,
    accuracy,
    average_precision,
    mean_average_precision,
    per_class_average_precision,
    task_metric,
)
