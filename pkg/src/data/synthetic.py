"""
Synthetic classification tasks standing in for real image/video/audio datasets.

Each class owns a template; an example is the sum of its classes' templates plus i.i.d. Gaussian
noise. Templates are mutually orthogonal with unit RMS per value, so with noise 0 the classes are
exactly separable by a linear map on raw values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Tuple

import numpy as np

from modeling.tokenizers import ModalityGeometry

if TYPE_CHECKING:
    from schemas.run_config import TaskSpec

# Below this noise level the toy co-training setup separates every task.
EASY_NOISE_THRESHOLD = 0.5


@dataclass(frozen=True)
class SyntheticTask:
    geometry: ModalityGeometry
    num_classes: int
    noise: float = 0.1
    train_size: int = 256
    val_size: int = 64
    test_size: int = 64
    seed: int = 0
    multilabel: bool = False

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if min(self.train_size, self.val_size, self.test_size) < 1:
            raise ValueError("split sizes must be >= 1")
        dim = int(np.prod(self.geometry.input_shape))
        if dim < self.num_classes:
            raise ValueError(f"{dim} input values cannot hold {self.num_classes} orthogonal templates")


@dataclass(frozen=True)
class Dataset:
    """`labels` is (n,) int64 class ids, or (n, C) uint8 multi-hot for multilabel tasks."""

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    multilabel: bool = False

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def targets(self, dtype: np.dtype = np.float32) -> np.ndarray:
        """One-hot / multi-hot float targets."""
        if self.multilabel:
            return self.labels.astype(dtype)
        out = np.zeros((len(self), self.num_classes), dtype=dtype)
        out[np.arange(len(self)), self.labels] = 1
        return out


def templates(task: SyntheticTask) -> np.ndarray:
    """(C, *input_shape) orthogonal class templates with unit RMS per value."""
    rng = np.random.default_rng(np.random.SeedSequence([task.seed, 0]))
    dim = int(np.prod(task.geometry.input_shape))
    q, _ = np.linalg.qr(rng.normal(size=(dim, task.num_classes)))
    return (q.T * np.sqrt(dim)).reshape((task.num_classes,) + task.geometry.input_shape)


def _single_labels(n: int, c: int, rng: np.random.Generator) -> np.ndarray:
    # Balanced within one example per class.
    return rng.permutation(np.arange(n) % c).astype(np.int64)


def _multi_labels(n: int, c: int, rng: np.random.Generator) -> np.ndarray:
    labels = (rng.random((n, c)) < 0.3).astype(np.uint8)
    empty = labels.sum(axis=1) == 0
    labels[empty, rng.integers(0, c, size=int(empty.sum()))] = 1
    # The first min(n, c) rows guarantee every class a positive before shuffling.
    for k in range(min(n, c)):
        labels[k, k] = 1
    return labels[rng.permutation(n)]


def _split(task: SyntheticTask, size: int, tmpl: np.ndarray, seed: np.random.SeedSequence) -> Dataset:
    rng = np.random.default_rng(seed)
    c = task.num_classes
    if task.multilabel:
        labels = _multi_labels(size, c, rng)
        clean = np.tensordot(labels.astype(np.float64), tmpl, axes=(1, 0))
    else:
        labels = _single_labels(size, c, rng)
        clean = tmpl[labels]
    noise = rng.normal(0.0, task.noise, size=clean.shape) if task.noise > 0 else 0.0
    inputs = (clean + noise).astype(np.float32)
    return Dataset(inputs=inputs, labels=labels, num_classes=c, multilabel=task.multilabel)


def generate(task: SyntheticTask) -> Dict[str, Dataset]:
    """Deterministic train/val/test splits sharing one template set."""
    tmpl = templates(task)
    seeds = np.random.SeedSequence([task.seed, 1]).spawn(3)
    sizes: Tuple[int, int, int] = (task.train_size, task.val_size, task.test_size)
    return {name: _split(task, n, tmpl, s) for name, n, s in zip(("train", "val", "test"), sizes, seeds)}


def task_from_spec(spec: "TaskSpec", geometry: ModalityGeometry) -> SyntheticTask:
    return SyntheticTask(
        geometry=geometry,
        num_classes=spec.num_classes,
        noise=spec.noise,
        train_size=spec.train_size,
        val_size=spec.val_size,
        test_size=spec.test_size,
        seed=spec.data_seed,
        multilabel=spec.multilabel,
    )
