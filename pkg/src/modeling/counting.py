"""
Parameter accounting.

Counted: every stored real value, including biases, LN affines, class tokens and positional tables
at the configured (fine-tuning) resolution. The single-task fleet is one full trunk plus its own
tokenizer and head per task.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Dict, Optional

from .encoder import layer_param_count
from .model import PolyViT
from .tokenizers import tokenizer_param_count

if TYPE_CHECKING:
    from schemas.run_config import RunConfig


@dataclass(frozen=True)
class ParamBreakdown:
    shared: int
    per_modality: Dict[str, int] = field(default_factory=dict)
    per_task: Dict[str, int] = field(default_factory=dict)
    fleet: int = 0

    @property
    def total(self) -> int:
        return self.shared + sum(self.per_modality.values()) + sum(self.per_task.values())

    @property
    def ratio(self) -> float:
        return self.fleet / self.total if self.total else 0.0

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["total"] = self.total
        out["ratio"] = self.ratio
        return out


def _size(params) -> int:
    return sum(p.size for _, p in params)


def param_count(model: PolyViT) -> ParamBreakdown:
    """Exact count over the model's stored tensors."""
    enc = model.encoder
    shared = sum(_size(layer.named_parameters()) for layer in enc.shared) + enc.final_gamma.size + enc.final_beta.size
    per_modality: Dict[str, int] = {}
    for modality in sorted(model.tokenizers):
        adaptors = sum(_size(layer.named_parameters()) for layer in enc.adaptors.get(modality, []))
        per_modality[modality] = _size(model.tokenizers[modality].named_parameters()) + adaptors
    per_task = {name: head.w.size + head.b.size for name, head in sorted(model.heads.items())}
    fleet = sum(
        per_modality[model.tasks[name].modality] + shared + per_task[name] for name in sorted(model.tasks)
    )
    return ParamBreakdown(shared=shared, per_modality=per_modality, per_task=per_task, fleet=fleet)


def count_parameters(config: "RunConfig", *, adapt_layers: Optional[int] = None) -> ParamBreakdown:
    """Analytic counterpart of `param_count` that never allocates weights."""
    m = config.model
    la = m.adapt_layers if adapt_layers is None else adapt_layers
    layer = layer_param_count(m.width, m.mlp_ratio)
    final_ln = 2 * m.width
    geometries = config.geometries()
    shared = (m.layers - la) * layer + final_ln
    per_modality = {
        name: tokenizer_param_count(geometries[name], m.width) + la * layer for name in sorted(geometries)
    }
    per_task = {name: (m.width + 1) * t.num_classes for name, t in sorted(config.tasks.items())}
    fleet = sum(per_modality[t.modality] + shared + per_task[name] for name, t in config.tasks.items())
    return ParamBreakdown(shared=shared, per_modality=per_modality, per_task=per_task, fleet=fleet)


def per_modality_models(config: "RunConfig") -> int:
    """One full model per modality, each co-trained on that modality's tasks."""
    m = config.model
    trunk = m.layers * layer_param_count(m.width, m.mlp_ratio) + 2 * m.width
    geometries = config.geometries()
    total = 0
    for name in sorted(geometries):
        heads = sum((m.width + 1) * t.num_classes for t in config.tasks.values() if t.modality == name)
        if heads:
            total += trunk + tokenizer_param_count(geometries[name], m.width) + heads
    return total


def size_variants(config: "RunConfig") -> Dict[str, int]:
    """Model-size comparison: configured PolyViT, L_adapt = L/2, one model per modality, single-task fleet."""
    configured = count_parameters(config)
    half = count_parameters(config, adapt_layers=config.model.layers // 2)
    return {
        "polyvit": configured.total,
        "polyvit_adapt_half": half.total,
        "per_modality": per_modality_models(config),
        "single_task_fleet": configured.fleet,
    }
