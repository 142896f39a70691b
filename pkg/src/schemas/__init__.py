"""Pydantic run configuration and shipped presets."""

from .presets import PRESETS
from .run_config import (
    ConfigError,
    ModalitySpec,
    ModelSpec,
    OptimizerSpec,
    OutputSpec,
    PretrainedSpec,
    RunConfig,
    ScheduleSpec,
    TaskSpec,
    TrainSpec,
    validate_run_config,
)

__all__ = [
    "PRESETS",
    "ConfigError",
    "ModalitySpec",
    "ModelSpec",
    "OptimizerSpec",
    "OutputSpec",
    "PretrainedSpec",
    "RunConfig",
    "ScheduleSpec",
    "TaskSpec",
    "TrainSpec",
    "validate_run_config",
]
