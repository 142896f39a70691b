"""
Weight transfer from a pretrained single-modality ViT, and cross-modal embedding conversions.

Kernels are stored as (P, d) with patch rows flattened in (frame, row, column, channel) order, so
the frame axis is the outermost block of rows. Positional tables carry the class slot in row 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from autodiff import Parameter, Tensor, ops

from .encoder import EncoderLayerParams, EncoderStack, build_stack, encoder_layer, init_layer
from .errors import TransferError
from .model import PolyViT, build_heads
from .tokenizers import ModalityGeometry, Tokenizer, init_tokenizer, make_tokenizer

if TYPE_CHECKING:
    from schemas.run_config import RunConfig

INFLATION_STRATEGIES = ("central_frame", "replicate", "replicate_scaled")


@dataclass
class PretrainedViT:
    """Single-modality image ViT: 2D patch embedding, positional table on a source grid, L layers."""

    tokenizer: Tokenizer
    layers: List[EncoderLayerParams]
    final_gamma: Parameter
    final_beta: Parameter
    eps: float = 1e-6

    @property
    def grid(self) -> Tuple[int, int]:
        gh, gw = self.tokenizer.geometry.grid
        return gh, gw

    @property
    def patch(self) -> Tuple[int, int]:
        h, w = self.tokenizer.geometry.patch
        return h, w

    @property
    def channels(self) -> int:
        return self.tokenizer.geometry.channels

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def class_features(self, inputs: np.ndarray) -> Tensor:
        z = self.tokenizer.tokenize(inputs)
        for layer in self.layers:
            z = encoder_layer(z, layer, eps=self.eps)
        z = ops.layer_norm(z, self.final_gamma, self.final_beta, self.eps)
        return ops.index(z, (slice(None), 0)) if z.ndim == 3 else ops.index(z, 0)


def synthetic_pretrained(
    *,
    width: int,
    layers: int,
    heads: int,
    image_shape: Sequence[int],
    patch: Sequence[int],
    rng: np.random.Generator,
    mlp_ratio: int = 4,
    dtype: np.dtype = np.float32,
    eps: float = 1e-6,
) -> PretrainedViT:
    """Random stand-in for a pretrained checkpoint; biases and LN affines are jittered off their defaults."""
    geometry = ModalityGeometry("image", tuple(image_shape), tuple(patch))
    tokenizer = init_tokenizer(geometry, width, rng, dtype=dtype, prefix="pretrained.tokenizer")
    tokenizer.cls.assign(rng.normal(0.0, 0.02, size=width))
    stack: List[EncoderLayerParams] = []
    for _ in range(layers):
        layer = init_layer(width, heads, rng, mlp_ratio=mlp_ratio, dtype=dtype)
        for key, p in layer.named_parameters():
            if not key.endswith("_w"):
                p.assign(p.data + rng.normal(0.0, 0.02, size=p.shape))
        stack.append(layer)
    return PretrainedViT(
        tokenizer=tokenizer,
        layers=stack,
        final_gamma=Parameter(1.0 + rng.normal(0.0, 0.02, size=width), dtype=dtype),
        final_beta=Parameter(rng.normal(0.0, 0.02, size=width), dtype=dtype),
        eps=eps,
    )


# --- positional tables ---------------------------------------------------------------------


def _resample_axis(a: np.ndarray, axis: int, n_out: int) -> np.ndarray:
    """Align-corners linear resampling along one axis; source coordinates are exact rationals."""
    g = a.shape[axis]
    if g == n_out:
        return a
    if n_out == 1:
        num, den = np.array([g - 1]), 2
    else:
        num, den = np.arange(n_out) * (g - 1), n_out - 1
    lo = num // den
    frac = (num % den) / den
    hi = np.minimum(lo + 1, g - 1)
    a_lo = np.take(a, lo, axis=axis)
    a_hi = np.take(a, hi, axis=axis)
    shape = [1] * a.ndim
    shape[axis] = n_out
    return a_lo + frac.reshape(shape).astype(a.dtype) * (a_hi - a_lo)


def _split_table(p: np.ndarray, cells: int, what: str) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != 1 + cells:
        raise TransferError(f"{what}: table of shape {p.shape} does not have 1 + {cells} rows")
    return p[:1], p[1:]


def interp_pos(p_src: np.ndarray, src_grid: Sequence[int], dst_grid: Sequence[int]) -> np.ndarray:
    """Bilinearly resample the grid part of a positional table; the class slot is copied unchanged."""
    (gh, gw), (dh, dw) = tuple(src_grid), tuple(dst_grid)
    cls, grid = _split_table(p_src, gh * gw, "interp_pos")
    if (gh, gw) == (dh, dw):
        return np.array(p_src, copy=True)
    d = grid.shape[-1]
    cells = grid.reshape(gh, gw, d)
    cells = _resample_axis(cells, 0, dh)
    cells = _resample_axis(cells, 1, dw)
    return np.concatenate([cls, cells.reshape(dh * dw, d)], axis=0)


def pos_video_to_2d(
    p_vid: np.ndarray,
    video_grid: Sequence[int],
    dst_grid: Sequence[int],
) -> np.ndarray:
    """Mean over the frame axis per spatial cell, then interp_pos to `dst_grid`."""
    gf, gh, gw = tuple(video_grid)
    cls, grid = _split_table(p_vid, gf * gh * gw, "pos_video_to_2d")
    frames = grid.reshape(gf, gh * gw, -1)
    # base + mean(offsets) keeps frame-constant tables exact.
    base = frames[0]
    spatial = base + (frames - base).mean(axis=0)
    return interp_pos(np.concatenate([cls, spatial], axis=0), (gh, gw), dst_grid)


def pos_2d_to_video(
    p_img: np.ndarray,
    src_grid: Sequence[int],
    video_grid: Sequence[int],
) -> np.ndarray:
    """interp_pos to the video's spatial grid, then repeat the grid once per frame block."""
    gf, gh, gw = tuple(video_grid)
    table = interp_pos(p_img, src_grid, (gh, gw))
    return np.concatenate([table[:1], np.tile(table[1:], (gf, 1))], axis=0)


# --- patch-embedding kernels ---------------------------------------------------------------


def inflate_2d_to_3d(E_img: np.ndarray, frames: int, strategy: str = "central_frame") -> np.ndarray:
    """(P, d) 2D kernel -> (frames·P, d) tubelet kernel."""
    if frames < 1:
        raise TransferError(f"inflate: frames must be >= 1, got {frames}")
    E_img = np.asarray(E_img)
    if strategy == "central_frame":
        out = np.zeros((frames,) + E_img.shape, dtype=E_img.dtype)
        out[frames // 2] = E_img
    elif strategy == "replicate":
        out = np.broadcast_to(E_img, (frames,) + E_img.shape)
    elif strategy == "replicate_scaled":
        out = np.broadcast_to(E_img / E_img.dtype.type(frames) if frames > 1 else E_img, (frames,) + E_img.shape)
    else:
        raise TransferError(f"unknown inflation strategy {strategy!r}; expected one of {INFLATION_STRATEGIES}")
    return np.ascontiguousarray(out).reshape(frames * E_img.shape[0], E_img.shape[1])


def collapse_3d_to_2d(E_vid: np.ndarray, frames: int) -> np.ndarray:
    """Sum the frame axis of a (frames·P, d) tubelet kernel."""
    E_vid = np.asarray(E_vid)
    if frames < 1 or E_vid.shape[0] % frames:
        raise TransferError(f"collapse: {E_vid.shape[0]} kernel rows do not split into {frames} frames")
    return E_vid.reshape(frames, E_vid.shape[0] // frames, E_vid.shape[1]).sum(axis=0)


def adapt_channels(E: np.ndarray, src_channels: int, dst_channels: int) -> np.ndarray:
    """Sum channels (C -> 1) or replicate a single channel scaled by 1/C (1 -> C)."""
    E = np.asarray(E)
    if src_channels == dst_channels:
        return E
    d = E.shape[1]
    per_channel = E.reshape(-1, src_channels, d)
    if dst_channels == 1:
        out = per_channel.sum(axis=1, keepdims=True)
    elif src_channels == 1:
        out = np.repeat(per_channel / E.dtype.type(dst_channels), dst_channels, axis=1)
    else:
        raise TransferError(f"no channel conversion from {src_channels} to {dst_channels} channels")
    return out.reshape(-1, d)


def _check_spatial_patch(src: Sequence[int], dst: ModalityGeometry) -> None:
    if tuple(src)[-2:] != dst.patch[-2:]:
        raise TransferError(
            f"{dst.modality}: spatial patch {dst.patch[-2:]} differs from source patch {tuple(src)[-2:]}"
        )


# --- assembly ------------------------------------------------------------------------------


def assign_layers(
    pretrained: PretrainedViT,
    adapt_layers: int,
    modalities: Mapping[str, float],
) -> EncoderStack:
    """
    Adaptor layers of every modality start as independent copies of pretrained layers [0, L_adapt);
    the shared tail is one copy of layers [L_adapt, L).
    """
    if adapt_layers < 0 or adapt_layers > pretrained.num_layers:
        raise TransferError(f"adapt_layers {adapt_layers} outside [0, {pretrained.num_layers}]")
    return build_stack(
        pretrained.layers,
        adapt_layers,
        modalities,
        pretrained.final_gamma,
        pretrained.final_beta,
        eps=pretrained.eps,
    )


def tokenizer_from_pretrained(
    pretrained: PretrainedViT,
    geometry: ModalityGeometry,
    inflation: str = "central_frame",
) -> Tokenizer:
    _check_spatial_patch(pretrained.patch, geometry)
    src = pretrained.tokenizer
    E = adapt_channels(src.E.data, pretrained.channels, geometry.channels)
    if geometry.modality == "video":
        E = inflate_2d_to_3d(E, geometry.frames, inflation)
        pos = pos_2d_to_video(src.pos.data, pretrained.grid, geometry.grid)
    else:
        pos = interp_pos(src.pos.data, pretrained.grid, geometry.grid)
    return make_tokenizer(geometry, E, src.cls.data, pos, dtype=src.E.dtype)


def init_from_pretrained(
    pretrained: PretrainedViT,
    config: "RunConfig",
    *,
    inflation: Optional[str] = None,
    rng: Optional[np.random.Generator] = None,
) -> PolyViT:
    """PolyViT whose tokenizers and trunk come from `pretrained`; heads are freshly initialized per task."""
    m = config.model
    if m.width != pretrained.tokenizer.width:
        raise TransferError(f"model.width {m.width} differs from pretrained width {pretrained.tokenizer.width}")
    if m.layers != pretrained.num_layers:
        raise TransferError(f"model.layers {m.layers} differs from pretrained depth {pretrained.num_layers}")
    strategy = inflation or config.pretrained.inflation
    rng = rng if rng is not None else np.random.default_rng(m.init_seed)
    geometries = config.geometries()
    tokenizers: Dict[str, Tokenizer] = {
        name: tokenizer_from_pretrained(pretrained, geometries[name], strategy) for name in sorted(geometries)
    }
    encoder = assign_layers(
        pretrained,
        m.adapt_layers,
        {name: spec.stochastic_depth for name, spec in config.modalities.items()},
    )
    return PolyViT(
        tokenizers=tokenizers,
        encoder=encoder,
        heads=build_heads(config.tasks, m.width, rng, dtype=pretrained.tokenizer.E.dtype),
        tasks=dict(config.tasks),
    )


def derive_tokenizer(source: Tokenizer, geometry: ModalityGeometry) -> Tokenizer:
    """
    Convert a trained tokenizer to another modality's geometry for probing.

    Video sources collapse their kernel over frames and average their positional table over frames;
    video destinations replicate the 2D kernel per frame and repeat the table per frame block.
    """
    src_geo = source.geometry
    _check_spatial_patch(src_geo.patch, geometry)
    E = source.E.data
    pos = source.pos.data
    src_video = src_geo.modality == "video"
    dst_video = geometry.modality == "video"

    if src_video and dst_video and src_geo.frames == geometry.frames and src_geo.grid == geometry.grid:
        E = adapt_channels(E, src_geo.channels, geometry.channels)
        return make_tokenizer(geometry, E, source.cls.data, pos, dtype=source.E.dtype)

    if src_video:
        E = collapse_3d_to_2d(E, src_geo.frames)
        spatial = src_geo.grid[1:]
        pos = pos_video_to_2d(pos, src_geo.grid, spatial)
    else:
        spatial = src_geo.grid
    E = adapt_channels(E, src_geo.channels, geometry.channels)
    if dst_video:
        E = inflate_2d_to_3d(E, geometry.frames, "replicate")
        pos = pos_2d_to_video(pos, spatial, geometry.grid)
    else:
        pos = interp_pos(pos, spatial, geometry.grid)
    return make_tokenizer(geometry, E, source.cls.data, pos, dtype=source.E.dtype)
