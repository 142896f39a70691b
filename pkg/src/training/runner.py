"""
End-to-end training run for one validated RunConfig: data, initial model, plan, co-training.

Every random draw is derived from the config seeds (`model.init_seed`, `schedule.seed`,
`train.seed`, `task.<name>.data_seed`, `pretrained.seed`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from data.streams import TaskStream
from data.synthetic import Dataset, generate, task_from_spec
from modeling.model import PolyViT, build_polyvit
from modeling.transfer import init_from_pretrained, synthetic_pretrained
from optimizers import OptimizerState
from schedules import SchedulePlan, build, truncate
from schemas.run_config import RunConfig, validate_run_config

from .cotrain import CotrainOptions, cotrain, make_eval_hook
from .train_log import TrainLog

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    model: PolyViT
    state: OptimizerState
    log: TrainLog
    plan: SchedulePlan
    datasets: Dict[str, Dict[str, Dataset]]


def with_overrides(
    config: RunConfig,
    *,
    seed: Optional[int] = None,
    schedule: Optional[str] = None,
    max_steps: Optional[int] = None,
) -> RunConfig:
    """Copy of `config` with command-line overrides applied and re-validated. `seed` sets every run seed."""
    data = config.model_dump(by_alias=True)
    if seed is not None:
        data["model"]["init_seed"] = seed
        data["schedule"]["seed"] = seed
        data["train"]["seed"] = seed
    if schedule is not None:
        data["schedule"]["kind"] = schedule
    if max_steps is not None:
        data["train"]["max_steps"] = max_steps
    return validate_run_config(data)


def task_datasets(config: RunConfig) -> Dict[str, Dict[str, Dataset]]:
    geometries = config.geometries()
    return {
        name: generate(task_from_spec(spec, geometries[spec.modality])) for name, spec in config.tasks.items()
    }


def plan_for(config: RunConfig) -> SchedulePlan:
    names = config.task_names()
    order = None
    if config.schedule.order is not None:
        order = [names.index(n) for n in config.schedule.order]
    plan = build(
        config.schedule.kind,
        [config.tasks[n].steps for n in names],
        config.schedule.seed,
        task_names=names,
        order=order,
    )
    if config.train.max_steps is not None:
        plan = truncate(plan, config.train.max_steps)
    return plan


def initial_model(config: RunConfig) -> PolyViT:
    """Random init, or init from a synthetic pretrained image ViT when `pretrained.enabled`."""
    if not config.pretrained.enabled:
        return build_polyvit(config)
    m, p = config.model, config.pretrained
    pretrained = synthetic_pretrained(
        width=m.width,
        layers=m.layers,
        heads=m.heads,
        image_shape=p.image_shape,
        patch=p.patch,
        rng=np.random.default_rng(p.seed),
        mlp_ratio=m.mlp_ratio,
        dtype=np.dtype(m.dtype),
        eps=m.ln_eps,
    )
    logger.info("[Cotrain] initializing from pretrained image ViT (%s inflation)", p.inflation)
    return init_from_pretrained(pretrained, config)


def _stream_seed(train_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([train_seed, index]).generate_state(1)[0])


def make_streams(config: RunConfig, datasets: Dict[str, Dict[str, Dataset]]) -> Dict[str, TaskStream]:
    dtype = np.dtype(config.model.dtype)
    return {
        name: TaskStream(datasets[name]["train"], config.train.batch_size, _stream_seed(config.train.seed, j), dtype=dtype)
        for j, name in enumerate(config.task_names())
    }


def run_training(config: RunConfig, *, model: Optional[PolyViT] = None) -> RunResult:
    datasets = task_datasets(config)
    model = model if model is not None else initial_model(config)
    plan = plan_for(config)
    state = OptimizerState(momentum=config.optimizer.momentum)
    split = config.train.eval_split
    hook = make_eval_hook(model, {name: ds[split] for name, ds in datasets.items()}, split)
    options = CotrainOptions(
        seed=config.train.seed,
        warmup_mode=config.optimizer.warmup_mode,
        decay=config.optimizer.decay,
        eval_every=config.train.eval_every,
    )
    log = cotrain(model, plan, make_streams(config, datasets), state, options=options, eval_hook=hook)
    every = config.train.eval_every
    if len(plan) and not (every and len(plan) % every == 0):
        for record in hook(len(plan)):
            log.add_eval(record)
    return RunResult(model=model, state=state, log=log, plan=plan, datasets=datasets)
