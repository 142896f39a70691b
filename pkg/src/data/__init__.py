"""Synthetic multi-modal tasks, per-task minibatch streams and the PVDS dataset format."""

from .pvds import DatasetFormatError, decode_dataset, encode_dataset, read_dataset, write_dataset
from .streams import TaskStream
from .synthetic import EASY_NOISE_THRESHOLD, Dataset, SyntheticTask, generate, task_from_spec, templates

__all__ = [
    "EASY_NOISE_THRESHOLD",
    "Dataset",
    "DatasetFormatError",
    "SyntheticTask",
    "TaskStream",
    "decode_dataset",
    "encode_dataset",
    "generate",
    "read_dataset",
    "task_from_spec",
    "templates",
    "write_dataset",
]
