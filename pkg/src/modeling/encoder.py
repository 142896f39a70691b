"""
Pre-norm transformer encoder split into per-modality adaptor layers and shared layers.

    y   = MSA(LN(z)) + z
    out = MLP(LN(y)) + y

Residual branches are dropped per example with probability p in training mode (stochastic depth)
and rescaled by 1/(1−p) when kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from autodiff import Parameter, Tensor, ops

from .errors import ModelError

LAYER_PARAM_NAMES = (
    "ln1.gamma",
    "ln1.beta",
    "msa.q_w",
    "msa.q_b",
    "msa.k_w",
    "msa.k_b",
    "msa.v_w",
    "msa.v_b",
    "msa.o_w",
    "msa.o_b",
    "ln2.gamma",
    "ln2.beta",
    "mlp.w1",
    "mlp.b1",
    "mlp.w2",
    "mlp.b2",
)


def layer_param_count(width: int, mlp_ratio: int = 4) -> int:
    """(4 + 2r)·d² + (9 + r)·d: four attention maps with biases, two LNs, a d→rd→d MLP."""
    d, r = width, mlp_ratio
    return (4 + 2 * r) * d * d + (9 + r) * d


@dataclass
class EncoderLayerParams:
    n_heads: int
    params: Dict[str, Parameter]

    def __post_init__(self) -> None:
        missing = [k for k in LAYER_PARAM_NAMES if k not in self.params]
        if missing:
            raise ModelError(f"encoder layer is missing parameters {missing}")
        d = self.width
        if d % self.n_heads:
            raise ModelError(f"width {d} is not divisible by n_heads {self.n_heads}")
        for key in ("q_w", "k_w", "v_w", "o_w"):
            if self.params[f"msa.{key}"].shape != (d, d):
                raise ModelError(f"msa.{key} has shape {self.params[f'msa.{key}'].shape}, expected {(d, d)}")

    @property
    def width(self) -> int:
        return self.params["ln1.gamma"].shape[0]

    def __getitem__(self, key: str) -> Parameter:
        return self.params[key]

    def named_parameters(self) -> Iterator[Tuple[str, Parameter]]:
        for key in LAYER_PARAM_NAMES:
            yield key, self.params[key]

    def copy(self) -> "EncoderLayerParams":
        """Independent deep copy (new Parameter objects with equal values)."""
        return EncoderLayerParams(
            n_heads=self.n_heads,
            params={k: Parameter(p.data, dtype=p.dtype, name=p.name) for k, p in self.params.items()},
        )


def init_layer(
    width: int,
    n_heads: int,
    rng: np.random.Generator,
    *,
    mlp_ratio: int = 4,
    dtype: np.dtype = np.float32,
) -> EncoderLayerParams:
    """LeCun-normal kernels, zero biases, unit LN scales."""
    d, hidden = width, mlp_ratio * width

    def kernel(fan_in: int, fan_out: int) -> np.ndarray:
        return rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_in, fan_out))

    values = {
        "ln1.gamma": np.ones(d),
        "ln1.beta": np.zeros(d),
        "msa.q_w": kernel(d, d),
        "msa.q_b": np.zeros(d),
        "msa.k_w": kernel(d, d),
        "msa.k_b": np.zeros(d),
        "msa.v_w": kernel(d, d),
        "msa.v_b": np.zeros(d),
        "msa.o_w": kernel(d, d),
        "msa.o_b": np.zeros(d),
        "ln2.gamma": np.ones(d),
        "ln2.beta": np.zeros(d),
        "mlp.w1": kernel(d, hidden),
        "mlp.b1": np.zeros(hidden),
        "mlp.w2": kernel(hidden, d),
        "mlp.b2": np.zeros(d),
    }
    return EncoderLayerParams(
        n_heads=n_heads,
        params={k: Parameter(v, dtype=dtype, name=k) for k, v in values.items()},
    )


def _as_batch(z: Tensor) -> Tuple[Tensor, bool]:
    if z.ndim == 2:
        return ops.reshape(z, (1,) + z.shape), False
    if z.ndim == 3:
        return z, True
    raise ModelError(f"expected tokens of shape (n, d) or (B, n, d), got {z.shape}")


def msa(z: Tensor, layer: EncoderLayerParams) -> Tensor:
    """Multi-head scaled dot-product self-attention, scale 1/sqrt(d/n_heads)."""
    zb, batched = _as_batch(z)
    b, n, d = zb.shape
    if d != layer.width:
        raise ModelError(f"msa: token width {d} vs layer width {layer.width}")
    h = layer.n_heads
    dh = d // h

    def heads(w: str, bias: str) -> Tensor:
        proj = ops.add(ops.matmul(zb, layer[w]), layer[bias])
        return ops.transpose(ops.reshape(proj, (b, n, h, dh)), (0, 2, 1, 3))

    q = heads("msa.q_w", "msa.q_b")
    k = heads("msa.k_w", "msa.k_b")
    v = heads("msa.v_w", "msa.v_b")
    scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    attn = ops.softmax(scores, axis=-1)
    ctx = ops.reshape(ops.transpose(ops.matmul(attn, v), (0, 2, 1, 3)), (b, n, d))
    out = ops.add(ops.matmul(ctx, layer["msa.o_w"]), layer["msa.o_b"])
    return out if batched else ops.index(out, 0)


def mlp(z: Tensor, layer: EncoderLayerParams) -> Tensor:
    hidden = ops.gelu(ops.add(ops.matmul(z, layer["mlp.w1"]), layer["mlp.b1"]))
    return ops.add(ops.matmul(hidden, layer["mlp.w2"]), layer["mlp.b2"])


def _residual(
    z: Tensor,
    branch_fn,
    survival_prob: float,
    training: bool,
    rng: Optional[np.random.Generator],
) -> Tensor:
    if not training or survival_prob >= 1.0:
        return ops.add(z, branch_fn(z))
    if survival_prob <= 0.0:
        return z
    if rng is None:
        raise ModelError("stochastic depth in training mode needs an rng")
    # One keep/drop draw per example.
    lead = z.shape[:-2]
    keep = rng.random(size=lead + (1, 1)) < survival_prob
    mask = Tensor(keep / survival_prob, dtype=z.dtype)
    return ops.add(z, ops.mul(branch_fn(z), mask))


def encoder_layer(
    z: Tensor,
    layer: EncoderLayerParams,
    survival_prob: float = 1.0,
    *,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    eps: float = 1e-6,
) -> Tensor:
    y = _residual(
        z,
        lambda t: msa(ops.layer_norm(t, layer["ln1.gamma"], layer["ln1.beta"], eps), layer),
        survival_prob,
        training,
        rng,
    )
    return _residual(
        y,
        lambda t: mlp(ops.layer_norm(t, layer["ln2.gamma"], layer["ln2.beta"], eps), layer),
        survival_prob,
        training,
        rng,
    )


@dataclass
class EncoderStack:
    """
    `adaptors[m]` holds modality m's first L_adapt layers; `shared` holds the remaining L_shared
    layers, the same objects for every modality. `drop_rates[m]` is the stochastic-depth rate applied
    to m's adaptor layers and to the shared layers while m is being encoded.
    """

    adaptors: Dict[str, List[EncoderLayerParams]]
    shared: List[EncoderLayerParams]
    final_gamma: Parameter
    final_beta: Parameter
    drop_rates: Dict[str, float] = field(default_factory=dict)
    eps: float = 1e-6

    def __post_init__(self) -> None:
        depths = {len(layers) for layers in self.adaptors.values()}
        if len(depths) > 1:
            raise ModelError(f"adaptor depths differ across modalities: {sorted(depths)}")

    @property
    def adapt_layers(self) -> int:
        return next(iter(len(v) for v in self.adaptors.values()), 0)

    @property
    def num_layers(self) -> int:
        return self.adapt_layers + len(self.shared)

    @property
    def modalities(self) -> Tuple[str, ...]:
        return tuple(sorted(self.adaptors))

    def layers_for(self, modality: str) -> List[EncoderLayerParams]:
        if modality not in self.adaptors:
            raise ModelError(f"unknown modality {modality!r}; encoder has {self.modalities}")
        return list(self.adaptors[modality]) + list(self.shared)

    def encode(
        self,
        z0: Tensor,
        modality: str,
        *,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        survival = 1.0 - float(self.drop_rates.get(modality, 0.0))
        z = z0
        for layer in self.layers_for(modality):
            z = encoder_layer(z, layer, survival, training=training, rng=rng, eps=self.eps)
        return ops.layer_norm(z, self.final_gamma, self.final_beta, self.eps)

    def named_parameters(self) -> Iterator[Tuple[str, Parameter]]:
        """Canonical names; layer indices are absolute positions in the stack."""
        for modality in sorted(self.adaptors):
            for k, layer in enumerate(self.adaptors[modality]):
                for key, p in layer.named_parameters():
                    yield f"{modality}.adapt.layer{k}.{key}", p
        offset = self.adapt_layers
        for k, layer in enumerate(self.shared):
            for key, p in layer.named_parameters():
                yield f"shared.layer{offset + k}.{key}", p
        yield "encoder.final_ln.gamma", self.final_gamma
        yield "encoder.final_ln.beta", self.final_beta

    def with_alias(self, modality: str, source: str) -> "EncoderStack":
        """A view where `modality` is routed through `source`'s adaptor layers (same objects)."""
        if source not in self.adaptors:
            raise ModelError(f"unknown source modality {source!r}")
        adaptors = dict(self.adaptors)
        adaptors[modality] = self.adaptors[source]
        rates = dict(self.drop_rates)
        rates.setdefault(modality, rates.get(source, 0.0))
        return EncoderStack(
            adaptors=adaptors,
            shared=self.shared,
            final_gamma=self.final_gamma,
            final_beta=self.final_beta,
            drop_rates=rates,
            eps=self.eps,
        )


def build_stack(
    layers: List[EncoderLayerParams],
    adapt_layers: int,
    modalities: Mapping[str, float],
    final_gamma: Parameter,
    final_beta: Parameter,
    *,
    eps: float = 1e-6,
) -> EncoderStack:
    """
    Split `layers` into per-modality adaptor copies of the first `adapt_layers` and a shared tail.

    `modalities` maps modality -> stochastic-depth rate. Every modality gets its own deep copy of the
    adaptor layers; the shared tail is copied once.
    """
    if adapt_layers < 0 or adapt_layers > len(layers):
        raise ModelError(f"adapt_layers {adapt_layers} outside [0, {len(layers)}]")
    return EncoderStack(
        adaptors={m: [layer.copy() for layer in layers[:adapt_layers]] for m in sorted(modalities)},
        shared=[layer.copy() for layer in layers[adapt_layers:]],
        final_gamma=Parameter(final_gamma.data, dtype=final_gamma.dtype, name="encoder.final_ln.gamma"),
        final_beta=Parameter(final_beta.data, dtype=final_beta.dtype, name="encoder.final_ln.beta"),
        drop_rates={m: float(p) for m, p in modalities.items()},
        eps=eps,
    )
