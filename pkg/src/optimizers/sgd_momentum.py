"""
Heavy-ball SGD with one momentum state shared by every task.

    m ← μ·m + g
    θ ← θ − lr·m

Only parameters that received a gradient in a step are touched by that step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Mapping, Optional

import numpy as np

from autodiff import Parameter, ShapeError

if TYPE_CHECKING:
    from schemas.run_config import TaskSpec

MOMENTUM_FORM = "heavy_ball"


@dataclass
class OptimizerState:
    momentum: float = 0.9
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    global_step: int = 0
    task_steps: Dict[str, int] = field(default_factory=dict)
    update_counts: Dict[str, int] = field(default_factory=dict)

    def record_task_step(self, task: str) -> None:
        self.task_steps[task] = self.task_steps.get(task, 0) + 1


def sgd_step(
    params: Mapping[str, Parameter],
    grads: Mapping[str, np.ndarray],
    lr: float,
    state: OptimizerState,
) -> None:
    """Apply one update to every parameter named in `grads`; buffers are created lazily as zeros."""
    mu = state.momentum
    for name, g in grads.items():
        p = params[name]
        g = np.asarray(g)
        if g.shape != p.shape:
            raise ShapeError(f"sgd_step: gradient {g.shape} vs parameter {name} {p.shape}")
        m = state.buffers.get(name)
        if m is None:
            m = np.zeros(p.shape, dtype=p.dtype)
        m = (mu * m + g).astype(p.dtype, copy=False)
        state.buffers[name] = m
        p.assign(p.data - p.dtype.type(lr) * m)
        state.update_counts[name] = state.update_counts.get(name, 0) + 1
    state.global_step += 1


def lr_at(
    task: "TaskSpec",
    step: int,
    warmup: int,
    *,
    decay: str = "constant",
    total_steps: Optional[int] = None,
) -> float:
    """
    Linear warmup to the task's base rate over `warmup` steps, then constant (or cosine to zero).

    `step` and `warmup` are global steps / the summed warmup in the default co-training mode, or the
    task's own counters in per-task mode.
    """
    base = float(task.lr)
    if warmup > 0 and step < warmup:
        return base * step / warmup
    if decay == "cosine" and total_steps is not None and total_steps > warmup:
        progress = min(1.0, (step - warmup) / (total_steps - warmup))
        return base * 0.5 * (1.0 + math.cos(math.pi * progress))
    return base
