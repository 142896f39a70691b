from __future__ import annotations

from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator

from modeling.errors import GeometryError
from modeling.tokenizers import MODALITIES, ModalityGeometry

ScheduleKind = Literal["task_by_task", "alternating", "uniform", "weighted", "accumulated"]
LossKind = Literal["softmax", "sigmoid"]
HeadInit = Literal["zeros", "lecun_normal"]
InflationStrategy = Literal["central_frame", "replicate", "replicate_scaled"]


class ConfigError(ValueError):
    """Invalid run configuration. The message starts with the offending dotted key."""

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


def _split_extents(value: Any) -> Any:
    # "384,384,3" and "384x384x3" both parse.
    if isinstance(value, str):
        parts = [p.strip() for p in value.replace("x", ",").split(",")]
        return [p for p in parts if p]
    return value


Extents = Annotated[Tuple[int, ...], BeforeValidator(_split_extents)]


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ModelSpec(_Spec):
    layers: int = Field(default=12, ge=1)
    width: int = Field(default=768, ge=1)
    heads: int = Field(default=12, ge=1)
    mlp_ratio: int = Field(default=4, ge=1)
    adapt_layers: int = Field(default=0, ge=0)
    ln_eps: float = Field(default=1e-6, gt=0)
    dtype: Literal["float32", "float64"] = "float32"
    init_seed: int = 0


class ModalitySpec(_Spec):
    """Geometry of one modality; `stochastic_depth` is the residual-branch drop rate while it is encoded."""

    input_shape: Extents
    patch: Extents
    allow_crop: bool = False
    stochastic_depth: float = Field(default=0.0, ge=0.0, le=1.0)

    def geometry(self, modality: str) -> ModalityGeometry:
        return ModalityGeometry(
            modality=modality,
            input_shape=tuple(self.input_shape),
            patch=tuple(self.patch),
            allow_crop=self.allow_crop,
        )


class TaskSpec(_Spec):
    modality: str
    num_classes: int = Field(alias="classes", ge=2)
    loss: LossKind = "softmax"
    steps: int = Field(default=1, ge=1)
    lr: float = Field(default=0.03, gt=0)
    warmup_steps: int = Field(default=0, ge=0, alias="warmup")
    head_init: HeadInit = "zeros"
    mixup_alpha: float = Field(default=0.0, ge=0.0)

    # Synthetic stand-in data.
    noise: float = Field(default=0.1, ge=0.0)
    train_size: int = Field(default=256, ge=1)
    val_size: int = Field(default=64, ge=1)
    test_size: int = Field(default=64, ge=1)
    data_seed: int = 0
    # Held-out share of the real training split this task mirrors; descriptive only.
    val_fraction: Optional[float] = Field(default=None, ge=0.0, lt=1.0)
    test_fraction: Optional[float] = Field(default=None, ge=0.0, lt=1.0)

    @property
    def multilabel(self) -> bool:
        return self.loss == "sigmoid"


class ScheduleSpec(_Spec):
    kind: ScheduleKind = "weighted"
    seed: int = 0
    order: Optional[List[str]] = None

    @field_validator("kind", mode="before")
    @classmethod
    def _normalize_kind(cls, v: Any) -> Any:
        return v.strip().replace("-", "_") if isinstance(v, str) else v

    @field_validator("order", mode="before")
    @classmethod
    def _split_order(cls, v: Any) -> Any:
        if isinstance(v, str):
            return [p.strip() for p in v.split(",") if p.strip()]
        return v


class OptimizerSpec(_Spec):
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    warmup_mode: Literal["global", "per_task"] = "global"
    decay: Literal["constant", "cosine"] = "constant"


class TrainSpec(_Spec):
    seed: int = 0
    batch_size: int = Field(default=16, ge=1)
    eval_every: int = Field(default=0, ge=0)
    eval_split: Literal["val", "test"] = "val"
    max_steps: Optional[int] = Field(default=None, ge=0)
    probe_steps: int = Field(default=300, ge=1)
    probe_lr: float = Field(default=0.1, gt=0)


class PretrainedSpec(_Spec):
    """Synthetic single-modality image checkpoint used to initialize the trunk."""

    enabled: bool = False
    seed: int = 0
    image_shape: Extents = (224, 224, 3)
    patch: Extents = (16, 16)
    inflation: InflationStrategy = "central_frame"


class OutputSpec(_Spec):
    dir: str = "runs"
    checkpoint: str = "model.pvck"
    log: str = "train.log"


class RunConfig(_Spec):
    model: ModelSpec = Field(default_factory=ModelSpec)
    modalities: Dict[str, ModalitySpec] = Field(default_factory=dict, alias="modality")
    tasks: Dict[str, TaskSpec] = Field(default_factory=dict, alias="task")
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    optimizer: OptimizerSpec = Field(default_factory=OptimizerSpec)
    train: TrainSpec = Field(default_factory=TrainSpec)
    pretrained: PretrainedSpec = Field(default_factory=PretrainedSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def _cross_references(self) -> "RunConfig":
        m = self.model
        if m.width % m.heads:
            raise ValueError(f"model.heads: width {m.width} is not divisible by {m.heads} heads")
        if m.adapt_layers > m.layers:
            raise ValueError(f"model.adapt_layers: {m.adapt_layers} exceeds model.layers {m.layers}")
        for name, spec in self.modalities.items():
            if name not in MODALITIES:
                raise ValueError(f"modality.{name}: unknown modality; expected one of {MODALITIES}")
            try:
                spec.geometry(name).grid
            except GeometryError as e:
                raise ValueError(f"modality.{name}.patch: {e}") from None
        if not self.tasks:
            raise ValueError("task: at least one task is required")
        for name, task in self.tasks.items():
            if "." in name or not name:
                raise ValueError(f"task.{name}: task names must be non-empty and contain no '.'")
            if task.modality not in self.modalities:
                raise ValueError(f"task.{name}.modality: unknown modality {task.modality!r}")
        if self.schedule.order is not None:
            if sorted(self.schedule.order) != sorted(self.tasks):
                raise ValueError(f"schedule.order: must list every task exactly once, got {self.schedule.order}")
        return self

    def task_names(self) -> List[str]:
        return list(self.tasks)

    def geometries(self) -> Dict[str, ModalityGeometry]:
        return {name: spec.geometry(name) for name, spec in self.modalities.items()}


def _error_key(err: Dict[str, Any]) -> str:
    loc = [str(p) for p in err.get("loc", ())]
    if loc:
        return ".".join(loc)
    # Model-level validators prefix their message with the key.
    msg = str(err.get("msg", ""))
    msg = msg.removeprefix("Value error, ")
    return msg.split(":", 1)[0] if ":" in msg else ""


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a nested mapping; any failure becomes a ConfigError naming the first bad key."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key = _error_key(err)
        msg = str(err.get("msg", "")).removeprefix("Value error, ")
        if key and msg.startswith(f"{key}: "):
            msg = msg[len(key) + 2 :]
        raise ConfigError(key, msg) from None
