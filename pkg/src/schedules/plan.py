"""
Task-sampling schedules as explicit plans.

A plan is a finite sequence of steps; each step is a tuple of task indices (one index for every
kind except `accumulated`, whose steps touch all T tasks). Per-task counts are exact, not expected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ("task_by_task", "alternating", "uniform", "weighted", "accumulated")

# Task order drawn for the task-by-task baseline on the nine-task setup.
BASELINE_TASK_ORDER = (
    "cifar100",
    "moments_in_time",
    "kinetics400",
    "mini_audioset",
    "vggsound",
    "pets",
    "cifar10",
    "imagenet1k",
    "resisc45",
)


class ScheduleError(ValueError):
    """Invalid schedule request."""


@dataclass(frozen=True)
class SchedulePlan:
    kind: str
    steps: Tuple[Tuple[int, ...], ...]
    budgets: Tuple[int, ...]
    counts: Tuple[int, ...]
    seed: int
    task_names: Tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def num_tasks(self) -> int:
        return len(self.budgets)

    def name_of(self, index: int) -> str:
        return self.task_names[index] if self.task_names else str(index)


@dataclass(frozen=True)
class ScheduleStats:
    counts: Tuple[int, ...]
    longest_run: int
    length: int


def normalize_kind(kind: str) -> str:
    k = kind.strip().replace("-", "_")
    if k not in SCHEDULE_KINDS:
        raise ScheduleError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    return k


def _even_counts(total: int, t: int) -> List[int]:
    """floor(total/t) each, remainder to the earliest tasks."""
    base, rem = divmod(total, t)
    return [base + (1 if j < rem else 0) for j in range(t)]


def _shuffled(counts: Sequence[int], rng: np.random.Generator) -> List[int]:
    multiset = np.repeat(np.arange(len(counts)), counts)
    return [int(j) for j in rng.permutation(multiset)]


def build(
    kind: str,
    budgets: Sequence[int],
    seed: int,
    *,
    task_names: Optional[Sequence[str]] = None,
    order: Optional[Sequence[int]] = None,
) -> SchedulePlan:
    """
    Build a plan over T tasks with step budgets U_j.

    `order` (task indices) fixes the block order of a task-by-task plan instead of drawing it from the seed.
    """
    k = normalize_kind(kind)
    budgets = tuple(int(u) for u in budgets)
    if not budgets:
        raise ScheduleError("budgets must name at least one task")
    if any(u < 1 for u in budgets):
        raise ScheduleError(f"every budget must be >= 1, got {list(budgets)}")
    names = tuple(task_names) if task_names is not None else ()
    if names and len(names) != len(budgets):
        raise ScheduleError(f"{len(names)} task names for {len(budgets)} budgets")
    t = len(budgets)
    total = sum(budgets)
    rng = np.random.default_rng(seed)

    if k == "task_by_task":
        if order is None:
            block_order = [int(j) for j in rng.permutation(t)]
        else:
            block_order = [int(j) for j in order]
            if sorted(block_order) != list(range(t)):
                raise ScheduleError(f"order {block_order} is not a permutation of {t} tasks")
        seq = [j for j in block_order for _ in range(budgets[j])]
        counts = list(budgets)
    elif k == "alternating":
        counts = _even_counts(total, t)
        rounds, rem = divmod(total, t)
        seq = [j for _ in range(rounds) for j in range(t)] + list(range(rem))
    elif k == "uniform":
        counts = _even_counts(total, t)
        seq = _shuffled(counts, rng)
    elif k == "weighted":
        counts = list(budgets)
        seq = _shuffled(counts, rng)
    else:
        rounds = total // t
        counts = [rounds] * t
        all_tasks = tuple(range(t))
        return SchedulePlan(
            kind=k,
            steps=tuple(all_tasks for _ in range(rounds)),
            budgets=budgets,
            counts=tuple(counts),
            seed=seed,
            task_names=names,
        )

    return SchedulePlan(
        kind=k,
        steps=tuple((j,) for j in seq),
        budgets=budgets,
        counts=tuple(counts),
        seed=seed,
        task_names=names,
    )


def stats(plan: SchedulePlan) -> ScheduleStats:
    counts = [0] * plan.num_tasks
    for step in plan.steps:
        for j in step:
            counts[j] += 1
    if plan.kind == "accumulated":
        longest = len(plan.steps)
    else:
        longest, run, prev = 0, 0, None
        for step in plan.steps:
            run = run + 1 if step == prev else 1
            prev = step
            longest = max(longest, run)
    return ScheduleStats(counts=tuple(counts), longest_run=longest, length=len(plan.steps))


def truncate(plan: SchedulePlan, max_steps: int) -> SchedulePlan:
    """First `max_steps` steps; intended counts become the executed counts."""
    if max_steps < 0:
        raise ScheduleError(f"max_steps must be >= 0, got {max_steps}")
    if max_steps >= len(plan):
        return plan
    steps = plan.steps[:max_steps]
    counts = [0] * plan.num_tasks
    for step in steps:
        for j in step:
            counts[j] += 1
    logger.info("[Schedule] truncated %s plan from %d to %d steps", plan.kind, len(plan), max_steps)
    return SchedulePlan(
        kind=plan.kind,
        steps=steps,
        budgets=plan.budgets,
        counts=tuple(counts),
        seed=plan.seed,
        task_names=plan.task_names,
    )


def dump_lines(plan: SchedulePlan) -> List[str]:
    """`<step_index> <task>` per step (comma-joined tasks for accumulated steps), then a `#` stats footer."""
    lines = [f"{i} {','.join(plan.name_of(j) for j in step)}" for i, step in enumerate(plan.steps)]
    s = stats(plan)
    lines.append(f"# kind={plan.kind} seed={plan.seed} length={s.length} longest_run={s.longest_run}")
    for j, c in enumerate(s.counts):
        lines.append(f"# count {plan.name_of(j)}={c}")
    return lines


def parse_dump_counts(lines: Sequence[str]) -> Dict[str, int]:
    """Recount a dumped plan from its step lines (the footer is ignored)."""
    counts: Dict[str, int] = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        _, tasks = line.split(" ", 1)
        for name in tasks.split(","):
            counts[name] = counts.get(name, 0) + 1
    return counts
