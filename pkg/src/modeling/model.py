"""
PolyViT: per-modality tokenizers, one encoder stack, per-task linear heads.

One task runs per forward pass. Heads are the only parameters keyed by task.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from autodiff import Parameter, Tensor, ops

from .encoder import EncoderStack, build_stack, init_layer
from .errors import ModelError
from .tokenizers import Tokenizer, init_tokenizer

if TYPE_CHECKING:
    from schemas.run_config import RunConfig, TaskSpec


@dataclass
class TaskHead:
    """Linear head on the final class token: logits = z_cls·w + b, w stored as (d, C)."""

    w: Parameter
    b: Parameter

    @property
    def num_classes(self) -> int:
        return self.b.shape[0]


def init_head(width: int, num_classes: int, kind: str, rng: np.random.Generator, *, dtype: np.dtype) -> TaskHead:
    if kind == "zeros":
        w = np.zeros((width, num_classes))
    elif kind == "lecun_normal":
        w = rng.normal(0.0, 1.0 / np.sqrt(width), size=(width, num_classes))
    else:
        raise ModelError(f"unknown head init {kind!r}")
    return TaskHead(w=Parameter(w, dtype=dtype), b=Parameter(np.zeros(num_classes), dtype=dtype))


@dataclass
class PolyViT:
    tokenizers: Dict[str, Tokenizer]
    encoder: EncoderStack
    heads: Dict[str, TaskHead]
    tasks: Dict[str, "TaskSpec"] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, task in self.tasks.items():
            if task.modality not in self.tokenizers:
                raise ModelError(f"task {name!r} uses modality {task.modality!r} which has no tokenizer")
            if name not in self.heads:
                raise ModelError(f"task {name!r} has no head")
            if self.heads[name].num_classes != task.num_classes:
                raise ModelError(
                    f"task {name!r}: head has {self.heads[name].num_classes} classes, spec says {task.num_classes}"
                )
        for modality in self.tokenizers:
            if modality not in self.encoder.adaptors:
                raise ModelError(f"modality {modality!r} has no route through the encoder")
        # Canonical names double as Parameter labels in diagnostics.
        for name, p in self.named_parameters():
            p.name = name

    @property
    def width(self) -> int:
        return self.encoder.final_gamma.shape[0]

    @property
    def modalities(self) -> Tuple[str, ...]:
        return tuple(sorted(self.tokenizers))

    def task(self, name: str) -> "TaskSpec":
        try:
            return self.tasks[name]
        except KeyError:
            raise ModelError(f"unknown task {name!r}; model has {sorted(self.tasks)}") from None

    def named_parameters(self) -> Iterator[Tuple[str, Parameter]]:
        """Every stored tensor under its canonical checkpoint name."""
        for modality in sorted(self.tokenizers):
            for key, p in self.tokenizers[modality].named_parameters():
                yield f"{modality}.tokenizer.{key}", p
        yield from self.encoder.named_parameters()
        for name in sorted(self.heads):
            yield f"task.{name}.head.w", self.heads[name].w
            yield f"task.{name}.head.b", self.heads[name].b

    def parameters(self) -> Dict[str, Parameter]:
        return dict(self.named_parameters())

    def head_parameter_names(self) -> List[str]:
        return [n for n, _ in self.named_parameters() if n.startswith("task.")]

    def encode_class_token(
        self,
        inputs: np.ndarray,
        modality: str,
        *,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        if modality not in self.tokenizers:
            raise ModelError(f"unknown modality {modality!r}; model has {self.modalities}")
        z0 = self.tokenizers[modality].tokenize(inputs)
        zl = self.encoder.encode(z0, modality, training=training, rng=rng)
        return ops.index(zl, (slice(None), 0)) if zl.ndim == 3 else ops.index(zl, 0)

    def forward(
        self,
        inputs: np.ndarray,
        task: str,
        *,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Logits of shape (C,) for one input or (B, C) for a batch."""
        spec = self.task(task)
        head = self.heads[task]
        z_cls = self.encode_class_token(inputs, spec.modality, training=training, rng=rng)
        if z_cls.ndim == 1:
            row = ops.reshape(z_cls, (1, self.width))
            return ops.index(ops.add(ops.matmul(row, head.w), head.b), 0)
        return ops.add(ops.matmul(z_cls, head.w), head.b)

    def features(self, inputs: np.ndarray, modality: str, *, batch_size: int = 64) -> np.ndarray:
        """Eval-mode final class-token encodings, (B, d), computed without recording gradients."""
        x = np.asarray(inputs)
        out = []
        for start in range(0, x.shape[0], batch_size):
            out.append(self.encode_class_token(x[start : start + batch_size], modality).numpy())
        if not out:
            return np.zeros((0, self.width), dtype=self.encoder.final_gamma.dtype)
        return np.concatenate(out, axis=0)

    def with_modality(self, tokenizer: Tokenizer, source: str) -> "PolyViT":
        """
        A view that adds `tokenizer`'s modality routed through `source`'s adaptor layers.

        Shares every existing Parameter object; no task is added.
        """
        modality = tokenizer.modality
        tokenizers = dict(self.tokenizers)
        tokenizers[modality] = tokenizer
        encoder = self.encoder if modality in self.encoder.adaptors else self.encoder.with_alias(modality, source)
        view = PolyViT.__new__(PolyViT)
        view.tokenizers = tokenizers
        view.encoder = encoder
        view.heads = self.heads
        view.tasks = self.tasks
        return view


def build_polyvit(config: "RunConfig", rng: Optional[np.random.Generator] = None) -> PolyViT:
    """Randomly initialized PolyViT for a validated run configuration."""
    m = config.model
    rng = rng if rng is not None else np.random.default_rng(m.init_seed)
    dtype = np.dtype(m.dtype)
    geometries = config.geometries()
    tokenizers = {
        name: init_tokenizer(geometries[name], m.width, rng, dtype=dtype) for name in sorted(geometries)
    }
    layers = [init_layer(m.width, m.heads, rng, mlp_ratio=m.mlp_ratio, dtype=dtype) for _ in range(m.layers)]
    encoder = build_stack(
        layers,
        m.adapt_layers,
        {name: spec.stochastic_depth for name, spec in config.modalities.items()},
        Parameter(np.ones(m.width), dtype=dtype),
        Parameter(np.zeros(m.width), dtype=dtype),
        eps=m.ln_eps,
    )
    return PolyViT(
        tokenizers=tokenizers,
        encoder=encoder,
        heads=build_heads(config.tasks, m.width, rng, dtype=dtype),
        tasks=dict(config.tasks),
    )


def build_heads(
    tasks: Mapping[str, "TaskSpec"],
    width: int,
    rng: np.random.Generator,
    *,
    dtype: np.dtype,
) -> Dict[str, TaskHead]:
    return {
        name: init_head(width, task.num_classes, task.head_init, rng, dtype=dtype) for name, task in tasks.items()
    }
