"""
Co-training loop.

Every plan step draws one minibatch from a single task's stream, runs a training-mode forward,
backpropagates that task's loss and applies one SGD update at that task's learning rate. Steps of
an accumulated plan instead sum the gradients of one minibatch per task and apply one update at
the smallest of the tasks' learning rates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from autodiff import GradTape, backward
from data.streams import TaskStream
from data.synthetic import Dataset
from metrics import task_metric
from modeling.model import PolyViT
from optimizers import OptimizerState, lr_at, sgd_step
from schedules import SchedulePlan

from .losses import loss as compute_loss
from .losses import mixup
from .train_log import EvalRecord, StepRecord, TrainLog

logger = logging.getLogger(__name__)

EvalHook = Callable[[int], Sequence[EvalRecord]]


class TrainingError(RuntimeError):
    """Co-training cannot continue (missing data source, non-finite loss)."""


@dataclass(frozen=True)
class CotrainOptions:
    seed: int = 0
    warmup_mode: str = "global"
    decay: str = "constant"
    eval_every: int = 0
    log_every: int = 100


def task_gradients(
    model: PolyViT,
    task: str,
    inputs: np.ndarray,
    targets: np.ndarray,
    rng: Optional[np.random.Generator],
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Training-mode loss and gradients of one task's minibatch, keyed by canonical parameter name."""
    spec = model.task(task)
    params = model.parameters()
    with GradTape() as tape:
        logits = model.forward(inputs, task, training=True, rng=rng)
        value = compute_loss(logits, targets, spec.loss)
    loss_value = value.item()
    if not math.isfinite(loss_value):
        return loss_value, {}
    grads = backward(tape, value)
    return loss_value, {name: grads[p] for name, p in params.items() if p in grads}


def _total_warmup(model: PolyViT, plan: SchedulePlan) -> int:
    names = plan.task_names or tuple(model.tasks)
    return sum(model.task(name).warmup_steps for name in names)


def cotrain(
    model: PolyViT,
    plan: SchedulePlan,
    streams: Mapping[str, TaskStream],
    state: OptimizerState,
    *,
    options: CotrainOptions = CotrainOptions(),
    eval_hook: Optional[EvalHook] = None,
    log: Optional[TrainLog] = None,
) -> TrainLog:
    log = log if log is not None else TrainLog()
    names = [plan.name_of(j) for j in range(plan.num_tasks)]
    missing = [n for n in names if n not in streams]
    if missing:
        raise TrainingError(f"no data source for tasks {missing}")
    for n in names:
        model.task(n)

    params = model.parameters()
    rng = np.random.default_rng(options.seed)
    total_warmup = _total_warmup(model, plan)
    task_totals = {names[j]: c for j, c in enumerate(plan.counts)}

    def lr_for(task: str) -> float:
        spec = model.task(task)
        if options.warmup_mode == "per_task":
            return lr_at(
                spec,
                state.task_steps.get(task, 0),
                spec.warmup_steps,
                decay=options.decay,
                total_steps=task_totals.get(task),
            )
        return lr_at(spec, state.global_step, total_warmup, decay=options.decay, total_steps=len(plan))

    logger.info(
        "[Cotrain] %s plan: %d steps over %d tasks, warmup=%d (%s)",
        plan.kind,
        len(plan),
        plan.num_tasks,
        total_warmup,
        options.warmup_mode,
    )
    for i, step in enumerate(plan.steps):
        step_tasks = [names[j] for j in step]
        summed: Dict[str, np.ndarray] = {}
        loss_total = 0.0
        for task in step_tasks:
            spec = model.task(task)
            x, y = streams[task].next_batch()
            if spec.mixup_alpha > 0:
                x, y, _ = mixup(x, y, spec.mixup_alpha, rng)
            value, grads = task_gradients(model, task, x, y, rng)
            if not math.isfinite(value):
                logger.error("[Cotrain] non-finite loss %r at step %d on task %s", value, i, task)
                raise TrainingError(f"non-finite loss {value!r} at step {i} on task {task}")
            loss_total += value
            for name, g in grads.items():
                prev = summed.get(name)
                summed[name] = g if prev is None else prev + g

        lr = min(lr_for(t) for t in step_tasks)
        sgd_step(params, summed, lr, state)
        for task in step_tasks:
            state.record_task_step(task)
        log.add_step(StepRecord(step=i, task=",".join(step_tasks), loss=float(loss_total), lr=float(lr)))
        if options.log_every and (i + 1) % options.log_every == 0:
            logger.info("[Cotrain] step %d/%d task=%s loss=%.4f lr=%.5f", i + 1, len(plan), step_tasks[0], loss_total, lr)

        if eval_hook is not None and options.eval_every and (i + 1) % options.eval_every == 0:
            for record in eval_hook(i + 1):
                log.add_eval(record)
    return log


def predict(model: PolyViT, task: str, inputs: np.ndarray, *, batch_size: int = 64) -> np.ndarray:
    """Eval-mode logits for a batch, computed in chunks."""
    x = np.asarray(inputs)
    chunks: List[np.ndarray] = []
    for start in range(0, x.shape[0], batch_size):
        chunks.append(model.forward(x[start : start + batch_size], task).numpy())
    return np.concatenate(chunks, axis=0)


def evaluate(model: PolyViT, task: str, dataset: Dataset, *, batch_size: int = 64) -> Dict[str, float]:
    """Accuracy (single-label) or mAP (multilabel) of `task` on a dataset."""
    logits = predict(model, task, dataset.inputs, batch_size=batch_size)
    return task_metric(logits, dataset.labels, multilabel=dataset.multilabel)


def make_eval_hook(model: PolyViT, datasets: Mapping[str, Dataset], split: str) -> EvalHook:
    def hook(step: int) -> List[EvalRecord]:
        records = []
        for task in sorted(datasets):
            for metric, value in evaluate(model, task, datasets[task]).items():
                records.append(EvalRecord(step=step, task=task, split=split, metric=metric, value=float(value)))
                logger.info("[Cotrain] eval step=%d task=%s split=%s %s=%.4f", step, task, split, metric, value)
        return records

    return hook
