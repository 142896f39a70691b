"""Co-training, losses, mixup, linear probing and the training log."""

from .cotrain import (
    CotrainOptions,
    TrainingError,
    cotrain,
    evaluate,
    make_eval_hook,
    predict,
    task_gradients,
)
from .losses import LOSS_KINDS, LossError, MixupError, loss, mix, mixup
from .probe import ProbeResult, linear_probe, probe_view
from .runner import RunResult, initial_model, make_streams, plan_for, run_training, task_datasets, with_overrides
from .train_log import EvalRecord, StepRecord, TrainLog

__all__ = [
    "LOSS_KINDS",
    "CotrainOptions",
    "EvalRecord",
    "LossError",
    "MixupError",
    "ProbeResult",
    "RunResult",
    "StepRecord",
    "TrainLog",
    "TrainingError",
    "cotrain",
    "evaluate",
    "initial_model",
    "linear_probe",
    "loss",
    "make_eval_hook",
    "make_streams",
    "mix",
    "mixup",
    "plan_for",
    "predict",
    "probe_view",
    "run_training",
    "task_datasets",
    "task_gradients",
    "with_overrides",
]
