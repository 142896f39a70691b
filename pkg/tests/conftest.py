from __future__ import annotations

import copy
from typing import Any, Callable, Dict, Optional

import numpy as np
import pytest

from modeling import PolyViT, build_polyvit
from schemas.presets import TOY3
from schemas.run_config import RunConfig, validate_run_config


def _make_config(overrides: Optional[Dict[str, Any]] = None, *, base: Optional[Dict[str, Any]] = None) -> RunConfig:
    """The toy preset (or `base`) with dotted-key overrides; a None value deletes the key."""
    data = copy.deepcopy(base if base is not None else TOY3)
    for key, value in (overrides or {}).items():
        node = data
        *path, last = key.split(".")
        for part in path:
            node = node.setdefault(part, {})
        if value is None:
            node.pop(last, None)
        else:
            node[last] = value
    return validate_run_config(data)


@pytest.fixture
def make_config() -> Callable[..., RunConfig]:
    return _make_config


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def toy_config() -> RunConfig:
    return _make_config()


@pytest.fixture
def toy_config64() -> RunConfig:
    return _make_config({"model.dtype": "float64"})


@pytest.fixture
def toy_model64(toy_config64: RunConfig) -> PolyViT:
    return build_polyvit(toy_config64)


@pytest.fixture
def small_config() -> RunConfig:
    """Fast co-training config: tiny splits and budgets, one task per modality."""
    return _make_config(
        {
            "task.toy_image.steps": 6,
            "task.toy_video.steps": 5,
            "task.toy_audio.steps": 4,
            "task.toy_image.warmup": 2,
            "task.toy_video.warmup": 2,
            "task.toy_audio.warmup": 2,
            "task.toy_image.train_size": 24,
            "task.toy_video.train_size": 24,
            "task.toy_audio.train_size": 24,
            "task.toy_image.val_size": 8,
            "task.toy_video.val_size": 8,
            "task.toy_audio.val_size": 8,
            "task.toy_image.test_size": 8,
            "task.toy_video.test_size": 8,
            "task.toy_audio.test_size": 8,
            "train.batch_size": 4,
        }
    )


def toy_batch(model: PolyViT, task: str, batch: int, rng: np.random.Generator):
    """Random inputs and one-hot targets for one task of a model."""
    spec = model.task(task)
    geometry = model.tokenizers[spec.modality].geometry
    x = rng.normal(size=(batch,) + geometry.input_shape)
    y = np.zeros((batch, spec.num_classes))
    y[np.arange(batch), rng.integers(0, spec.num_classes, size=batch)] = 1.0
    return x, y
