"""
Modality tokenizers: input array -> token sequence with class token and positional table.

Patches are flattened in (frame, row, column, channel) order and emitted in raster order,
time-major for video. Audio spectrograms are 1-channel images (time rows, frequency columns).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from autodiff import Parameter, Tensor, ops

from .errors import GeometryError

MODALITIES = ("image", "video", "audio")
_RANKS = {"image": 3, "audio": 3, "video": 4}


@dataclass(frozen=True)
class ModalityGeometry:
    """
    Input/patch extents of one modality.

    `input_shape` is (H, W, C) for image/audio and (F, H, W, C) for video; `patch` is (h, w) or (f, h, w).
    """

    modality: str
    input_shape: Tuple[int, ...]
    patch: Tuple[int, ...]
    allow_crop: bool = False

    def __post_init__(self) -> None:
        if self.modality not in _RANKS:
            raise GeometryError(f"unknown modality {self.modality!r}; expected one of {MODALITIES}")
        rank = _RANKS[self.modality]
        if len(self.input_shape) != rank or len(self.patch) != rank - 1:
            raise GeometryError(
                f"{self.modality}: input_shape {self.input_shape} / patch {self.patch} have the wrong rank"
            )
        if any(int(n) < 1 for n in (*self.input_shape, *self.patch)):
            raise GeometryError(f"{self.modality}: extents must be positive, got {self.input_shape} / {self.patch}")
        object.__setattr__(self, "input_shape", tuple(int(n) for n in self.input_shape))
        object.__setattr__(self, "patch", tuple(int(n) for n in self.patch))

    @property
    def channels(self) -> int:
        return self.input_shape[-1]

    @property
    def spatial(self) -> Tuple[int, ...]:
        return self.input_shape[:-1]

    @property
    def grid(self) -> Tuple[int, ...]:
        """Patch counts per axis, e.g. (F/f, H/h, W/w)."""
        out = []
        for extent, p in zip(self.spatial, self.patch):
            if extent % p and not self.allow_crop:
                raise GeometryError(
                    f"{self.modality}: extent {extent} is not divisible by patch {p} "
                    f"(input {self.input_shape}, patch {self.patch}); set allow_crop to floor-crop"
                )
            if extent < p:
                raise GeometryError(f"{self.modality}: extent {extent} is smaller than patch {p}")
            out.append(extent // p)
        return tuple(out)

    @property
    def num_patches(self) -> int:
        return int(np.prod(self.grid))

    @property
    def patch_dim(self) -> int:
        return int(np.prod(self.patch)) * self.channels

    @property
    def frames(self) -> int:
        """Tubelet frame extent (1 for 2D modalities)."""
        return self.patch[0] if self.modality == "video" else 1


def seq_len(geometry: ModalityGeometry) -> int:
    """1 + number of patches."""
    return 1 + geometry.num_patches


def _batched(x: np.ndarray, geometry: ModalityGeometry) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.shape == geometry.input_shape:
        return x[None], False
    if x.ndim == len(geometry.input_shape) + 1 and x.shape[1:] == geometry.input_shape:
        return x, True
    raise GeometryError(f"{geometry.modality}: input shape {x.shape} does not match geometry {geometry.input_shape}")


def patchify(x: np.ndarray, geometry: ModalityGeometry) -> np.ndarray:
    """Split an input (optionally batched) into flattened patches: (N, P) or (B, N, P)."""
    xb, batched = _batched(x, geometry)
    grid = geometry.grid
    b = xb.shape[0]
    c = geometry.channels
    # Floor-crop; a no-op unless allow_crop admitted a ragged edge.
    crop = (slice(None),) + tuple(slice(0, g * p) for g, p in zip(grid, geometry.patch)) + (slice(None),)
    xb = xb[crop]
    if len(grid) == 2:
        (gh, gw), (h, w) = grid, geometry.patch
        out = xb.reshape(b, gh, h, gw, w, c).transpose(0, 1, 3, 2, 4, 5).reshape(b, gh * gw, h * w * c)
    else:
        (gf, gh, gw), (f, h, w) = grid, geometry.patch
        out = (
            xb.reshape(b, gf, f, gh, h, gw, w, c)
            .transpose(0, 1, 3, 5, 2, 4, 6, 7)
            .reshape(b, gf * gh * gw, f * h * w * c)
        )
    out = np.ascontiguousarray(out)
    return out if batched else out[0]


@dataclass
class Tokenizer:
    """Per-modality embedding parameters: E (P×d), class token (d), positional table ((N+1)×d)."""

    geometry: ModalityGeometry
    E: Parameter
    cls: Parameter
    pos: Parameter

    def __post_init__(self) -> None:
        d = self.width
        if self.E.shape != (self.geometry.patch_dim, d):
            raise GeometryError(f"{self.geometry.modality}: E shape {self.E.shape} vs patch dim {self.geometry.patch_dim}")
        if self.cls.shape != (d,):
            raise GeometryError(f"{self.geometry.modality}: class token shape {self.cls.shape} vs width {d}")
        if self.pos.shape != (seq_len(self.geometry), d):
            raise GeometryError(
                f"{self.geometry.modality}: positional table {self.pos.shape} vs sequence length {seq_len(self.geometry)}"
            )

    @property
    def modality(self) -> str:
        return self.geometry.modality

    @property
    def width(self) -> int:
        return self.E.shape[1]

    def named_parameters(self) -> Tuple[Tuple[str, Parameter], ...]:
        return (("E", self.E), ("cls", self.cls), ("pos", self.pos))

    def tokenize(self, x: np.ndarray) -> Tensor:
        """Row 0 = cls + p₀, row i = x_i·E + p_i. Returns (N+1, d), or (B, N+1, d) for a batch."""
        patches = patchify(x, self.geometry)
        batched = patches.ndim == 3
        if not batched:
            patches = patches[None]
        b = patches.shape[0]
        d = self.width
        emb = ops.matmul(Tensor(patches, dtype=self.E.dtype), self.E)
        cls = ops.broadcast_to(ops.reshape(self.cls, (1, 1, d)), (b, 1, d))
        z = ops.add(ops.concat([cls, emb], axis=1), self.pos)
        return z if batched else ops.index(z, 0)


def init_tokenizer(
    geometry: ModalityGeometry,
    width: int,
    rng: np.random.Generator,
    *,
    dtype: np.dtype = np.float32,
    prefix: str = "",
) -> Tokenizer:
    """LeCun-normal E, zero class token, N(0, 0.02²) positional table."""
    p = geometry.patch_dim
    name = prefix or f"{geometry.modality}.tokenizer"
    return Tokenizer(
        geometry=geometry,
        E=Parameter(rng.normal(0.0, 1.0 / np.sqrt(p), size=(p, width)), dtype=dtype, name=f"{name}.E"),
        cls=Parameter(np.zeros(width), dtype=dtype, name=f"{name}.cls"),
        pos=Parameter(rng.normal(0.0, 0.02, size=(seq_len(geometry), width)), dtype=dtype, name=f"{name}.pos"),
    )


def tokenizer_param_count(geometry: ModalityGeometry, width: int) -> int:
    return geometry.patch_dim * width + width + seq_len(geometry) * width


def make_tokenizer(
    geometry: ModalityGeometry,
    E: np.ndarray,
    cls: np.ndarray,
    pos: np.ndarray,
    *,
    dtype: Optional[np.dtype] = None,
) -> Tokenizer:
    name = f"{geometry.modality}.tokenizer"
    return Tokenizer(
        geometry=geometry,
        E=Parameter(E, dtype=dtype, name=f"{name}.E"),
        cls=Parameter(cls, dtype=dtype, name=f"{name}.cls"),
        pos=Parameter(pos, dtype=dtype, name=f"{name}.pos"),
    )
