"""
Linear probing: train a fresh head on frozen eval-mode class-token features.

Probes on a modality the model was never trained on go through a derived tokenizer (cross-modal
embedding conversion) and the adaptor layers of a source modality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional, Tuple

import numpy as np

from autodiff import GradTape, Tensor, backward, ops
from data.synthetic import Dataset
from metrics import task_metric
from modeling.errors import ModelError
from modeling.model import PolyViT, TaskHead, init_head
from modeling.tokenizers import ModalityGeometry
from modeling.transfer import derive_tokenizer
from optimizers import OptimizerState, sgd_step

from .losses import loss as compute_loss

if TYPE_CHECKING:
    from schemas.run_config import TaskSpec

logger = logging.getLogger(__name__)

_SOURCE_PREFERENCE = ("image", "video", "audio")


@dataclass
class ProbeResult:
    head: TaskHead
    metrics: Dict[str, float] = field(default_factory=dict)
    source_modality: Optional[str] = None


def _probe_source(model: PolyViT, modality: str, source: Optional[str]) -> str:
    """The tokenizer a derived view converts from: `source`, else the modality itself, else image, video, audio."""
    if source is None:
        candidates = [m for m in _SOURCE_PREFERENCE if m in model.tokenizers]
        if modality in model.tokenizers:
            candidates.insert(0, modality)
        if not candidates:
            raise ModelError("model has no tokenizer to convert from")
        source = candidates[0]
    if source not in model.tokenizers:
        raise ModelError(f"unknown source modality {source!r}")
    return source


def probe_view(
    model: PolyViT,
    geometry: ModalityGeometry,
    *,
    convert: bool = False,
    source: Optional[str] = None,
) -> Tuple[PolyViT, Optional[str]]:
    """
    The model itself when it already tokenizes `geometry`, else a converted view (if allowed), paired
    with the modality whose tokenizer the view was derived from (None for the model itself).
    """
    modality = geometry.modality
    own = model.tokenizers.get(modality)
    if own is not None and own.geometry == geometry:
        return model, None
    if not convert:
        raise ModelError(
            f"model has no {modality} tokenizer for input {geometry.input_shape}; "
            "enable cross-modal conversion to derive one"
        )
    source = _probe_source(model, modality, source)
    tokenizer = derive_tokenizer(model.tokenizers[source], geometry)
    logger.info("[Probe] derived %s tokenizer %s from %s", modality, geometry.input_shape, source)
    if own is not None:
        # Same modality at a new geometry keeps that modality's own adaptor route.
        return model.with_modality(tokenizer, modality), source
    return model.with_modality(tokenizer, source), source


def linear_probe(
    model: PolyViT,
    task: "TaskSpec",
    train: Dataset,
    *,
    geometry: ModalityGeometry,
    val: Optional[Dataset] = None,
    steps: int = 300,
    lr: float = 0.1,
    momentum: float = 0.9,
    convert: bool = False,
    source: Optional[str] = None,
    seed: int = 0,
) -> ProbeResult:
    """
    Fit a new (d, C) head by full-batch momentum SGD on frozen features. The model's own parameters
    are only read.
    """
    if geometry.modality != task.modality:
        raise ModelError(f"probe geometry is {geometry.modality} but the task is {task.modality}")
    view, used = probe_view(model, geometry, convert=convert, source=source)
    dtype = model.encoder.final_gamma.dtype
    features = view.features(train.inputs, geometry.modality)
    targets = train.targets(dtype)

    head = init_head(model.width, task.num_classes, "zeros", np.random.default_rng(seed), dtype=dtype)
    params = {"head.w": head.w, "head.b": head.b}
    state = OptimizerState(momentum=momentum)
    x = Tensor(features, dtype=dtype)
    for _ in range(steps):
        with GradTape() as tape:
            logits = ops.add(ops.matmul(x, head.w), head.b)
            value = compute_loss(logits, targets, task.loss)
        grads = backward(tape, value)
        sgd_step(params, {k: grads[p] for k, p in params.items()}, lr, state)

    def score(features: np.ndarray, labels: np.ndarray) -> Dict[str, float]:
        logits = features @ head.w.data + head.b.data
        return task_metric(logits, labels, multilabel=task.multilabel)

    metrics = {f"train_{k}": v for k, v in score(features, train.labels).items()}
    if val is not None:
        val_features = view.features(val.inputs, geometry.modality)
        metrics.update({f"val_{k}": v for k, v in score(val_features, val.labels).items()})
    logger.info("[Probe] %s probe after %d steps: %s", task.modality, steps, metrics)
    return ProbeResult(head=head, metrics=metrics, source_modality=used)
