from __future__ import annotations

from typing import Tuple, Union

import numpy as np

from autodiff import Tensor, ops

LOSS_KINDS = ("softmax", "sigmoid")


class LossError(ValueError):
    """Logits, labels and loss kind do not fit together."""


class MixupError(ValueError):
    """Mixup cannot be applied to the given batch."""


def loss(logits: Tensor, labels: Union[Tensor, np.ndarray], kind: str) -> Tensor:
    """
    Scalar training loss over a (B, C) batch.

    `softmax`: mean softmax cross-entropy; each label row must be a distribution (one-hot or mixed).
    `sigmoid`: per-class sigmoid binary cross-entropy averaged over batch and classes; labels in [0, 1].
    """
    if kind not in LOSS_KINDS:
        raise LossError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    targets = labels if isinstance(labels, Tensor) else Tensor(labels, dtype=logits.dtype)
    if logits.ndim == 1:
        logits = ops.reshape(logits, (1,) + logits.shape)
        targets = ops.reshape(targets, (1,) + targets.shape)
    if logits.shape != targets.shape:
        raise LossError(f"logits {logits.shape} vs labels {targets.shape}")
    t = targets.data
    if t.min(initial=0.0) < 0 or t.max(initial=0.0) > 1:
        raise LossError("labels must lie in [0, 1]")
    if kind == "softmax":
        if not np.allclose(t.sum(axis=-1), 1.0, atol=1e-5):
            raise LossError("softmax loss needs one-hot (or mixed one-hot) labels; got rows not summing to 1")
        return ops.softmax_cross_entropy(logits, targets)
    return ops.sigmoid_binary_cross_entropy(logits, targets)


def mix(
    inputs: np.ndarray,
    labels: np.ndarray,
    lam: float,
    perm: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """x'_i = λ·x_i + (1−λ)·x_σ(i), labels mixed identically."""
    x = np.asarray(inputs)
    y = np.asarray(labels)
    lam_x = x.dtype.type(lam)
    lam_y = y.dtype.type(lam)
    return lam_x * x + (1 - lam_x) * x[perm], lam_y * y + (1 - lam_y) * y[perm]


def mixup(
    inputs: np.ndarray,
    labels: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Draw λ ~ Beta(α, α) and a seeded pairing permutation; returns (inputs, labels, λ)."""
    if alpha <= 0:
        raise MixupError(f"mixup alpha must be > 0, got {alpha}")
    if len(inputs) < 2:
        raise MixupError(f"mixup needs a batch of at least 2, got {len(inputs)}")
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(len(inputs))
    x, y = mix(inputs, labels, lam, perm)
    return x, y, lam
