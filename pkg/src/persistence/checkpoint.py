"""
`PVCK` checkpoint format (all integers little-endian).

    magic      b"PVCK"
    version    u32
    metadata   u64 length, then UTF-8 `key=value` lines sorted by key
    model      u64 count, then count tensor entries sorted by name
    optimizer  u64 count, then count tensor entries (momentum buffers) sorted by name

Tensor entry: u32 name length, name (UTF-8), u32 rank, rank × u64 extents, u8 dtype (0 f32, 1 f64),
the row-major payload, u32 CRC-32 of the payload. Nothing may follow the optimizer directory.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from modeling.model import PolyViT, build_polyvit
from optimizers import MOMENTUM_FORM, OptimizerState
from schemas.run_config import ConfigError, RunConfig

from .atomic import atomic_write_bytes
from .config_text import config_from_items, config_items

logger = logging.getLogger(__name__)

MAGIC = b"PVCK"
VERSION = 1
DTYPE_TAGS = {np.dtype("float32"): 0, np.dtype("float64"): 1}
_TAG_TO_DTYPE = {v: k for k, v in DTYPE_TAGS.items()}
STOCHASTIC_DEPTH_PLACEMENT = "per_branch"


class CheckpointError(ValueError):
    """A checkpoint is malformed, corrupted, or does not match the model it is loaded into."""


@dataclass
class Checkpoint:
    metadata: Dict[str, str]
    tensors: Dict[str, np.ndarray]
    optimizer: Dict[str, np.ndarray] = field(default_factory=dict)


def run_metadata(config: RunConfig, state: Optional[OptimizerState] = None) -> Dict[str, str]:
    """Config echo (output paths excluded) plus the run facts needed to resume or audit it."""
    meta = {f"config.{k}": v for k, v in config_items(config, include_output=False).items()}
    meta.update(
        {
            "format.version": str(VERSION),
            "schedule.kind": config.schedule.kind,
            "seed.init": str(config.model.init_seed),
            "seed.schedule": str(config.schedule.seed),
            "seed.train": str(config.train.seed),
            "optimizer.form": MOMENTUM_FORM,
            "optimizer.momentum": repr(float(state.momentum if state is not None else config.optimizer.momentum)),
            "pretrained.inflation": config.pretrained.inflation if config.pretrained.enabled else "none",
            "stochastic_depth.placement": STOCHASTIC_DEPTH_PLACEMENT,
        }
    )
    if state is not None:
        meta["optimizer.global_step"] = str(state.global_step)
        for task, n in state.task_steps.items():
            meta[f"optimizer.task_steps.{task}"] = str(n)
        for name, n in state.update_counts.items():
            meta[f"optimizer.updates.{name}"] = str(n)
    return meta


def _encode_tensor(name: str, array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if arr.dtype not in DTYPE_TAGS:
        raise CheckpointError(f"{name}: unsupported dtype {arr.dtype}")
    raw_name = name.encode("utf-8")
    payload = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    out = struct.pack("<I", len(raw_name)) + raw_name
    out += struct.pack(f"<I{arr.ndim}Q", arr.ndim, *arr.shape)
    out += struct.pack("<B", DTYPE_TAGS[arr.dtype]) + payload
    return out + struct.pack("<I", zlib.crc32(payload))


def _encode_directory(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<Q", len(tensors))]
    parts.extend(_encode_tensor(name, tensors[name]) for name in sorted(tensors))
    return b"".join(parts)


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    lines = []
    for key in sorted(checkpoint.metadata):
        value = str(checkpoint.metadata[key])
        if "=" in key or "\n" in key or "\n" in value:
            raise CheckpointError(f"metadata entry {key!r} cannot be stored as a key=value line")
        lines.append(f"{key}={value}\n")
    meta = "".join(lines).encode("utf-8")
    return b"".join(
        [
            MAGIC,
            struct.pack("<IQ", VERSION, len(meta)),
            meta,
            _encode_directory(checkpoint.tensors),
            _encode_directory(checkpoint.optimizer),
        ]
    )


class _Reader:
    def __init__(self, payload: bytes) -> None:
        self._view = memoryview(payload)
        self.offset = 0

    def take(self, n: int, what: str) -> memoryview:
        end = self.offset + n
        if n < 0 or end > len(self._view):
            raise CheckpointError(f"truncated checkpoint while reading {what} at byte {self.offset}")
        chunk = self._view[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def remaining(self) -> int:
        return len(self._view) - self.offset


def _decode_directory(reader: _Reader, section: str) -> Dict[str, np.ndarray]:
    (count,) = reader.unpack("<Q", f"{section} count")
    out: Dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = reader.unpack("<I", f"{section} entry {i} name length")
        try:
            name = bytes(reader.take(name_len, f"{section} entry {i} name")).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"{section} entry {i}: name is not UTF-8") from None
        if name in out:
            raise CheckpointError(f"{section}: duplicate tensor name {name!r}")
        (rank,) = reader.unpack("<I", f"{name} rank")
        shape = reader.unpack(f"<{rank}Q", f"{name} extents")
        (tag,) = reader.unpack("<B", f"{name} dtype")
        if tag not in _TAG_TO_DTYPE:
            raise CheckpointError(f"{name}: unknown dtype tag {tag}")
        dtype = _TAG_TO_DTYPE[tag]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = bytes(reader.take(size, f"{name} payload"))
        (crc,) = reader.unpack("<I", f"{name} checksum")
        if zlib.crc32(payload) != crc:
            raise CheckpointError(f"{name}: payload checksum mismatch")
        out[name] = np.frombuffer(payload, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(shape)
    return out


def decode_checkpoint(payload: bytes) -> Checkpoint:
    reader = _Reader(payload)
    if bytes(reader.take(4, "magic")) != MAGIC:
        raise CheckpointError("not a PVCK checkpoint (bad magic)")
    version, meta_len = reader.unpack("<IQ", "header")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    try:
        meta_text = bytes(reader.take(meta_len, "metadata")).decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError("metadata is not UTF-8") from None
    metadata: Dict[str, str] = {}
    for line in meta_text.splitlines():
        if "=" not in line:
            raise CheckpointError(f"malformed metadata line {line!r}")
        key, value = line.split("=", 1)
        if key in metadata:
            raise CheckpointError(f"duplicate metadata key {key!r}")
        metadata[key] = value
    tensors = _decode_directory(reader, "model")
    optimizer = _decode_directory(reader, "optimizer")
    if reader.remaining:
        raise CheckpointError(f"{reader.remaining} trailing bytes after the optimizer directory")
    return Checkpoint(metadata=metadata, tensors=tensors, optimizer=optimizer)


def save_checkpoint(
    path: Union[str, Path],
    model: PolyViT,
    config: RunConfig,
    state: Optional[OptimizerState] = None,
) -> None:
    checkpoint = Checkpoint(
        metadata=run_metadata(config, state),
        tensors={name: p.numpy() for name, p in model.named_parameters()},
        optimizer=dict(state.buffers) if state is not None else {},
    )
    atomic_write_bytes(Path(path), encode_checkpoint(checkpoint))
    logger.info("[Checkpoint] wrote %d tensors to %s", len(checkpoint.tensors), path)


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    return decode_checkpoint(payload)


def checkpoint_config(checkpoint: Checkpoint) -> RunConfig:
    items = {k[len("config.") :]: v for k, v in checkpoint.metadata.items() if k.startswith("config.")}
    if not items:
        raise CheckpointError("checkpoint carries no run configuration")
    try:
        return config_from_items(items)
    except ConfigError as e:
        raise CheckpointError(f"stored configuration is invalid: {e}") from None


def optimizer_state(checkpoint: Checkpoint) -> OptimizerState:
    meta = checkpoint.metadata
    form = meta.get("optimizer.form", MOMENTUM_FORM)
    if form != MOMENTUM_FORM:
        raise CheckpointError(f"unsupported momentum form {form!r}")
    state = OptimizerState(momentum=float(meta.get("optimizer.momentum", "0.9")))
    state.global_step = int(meta.get("optimizer.global_step", "0"))
    for key, value in meta.items():
        if key.startswith("optimizer.task_steps."):
            state.task_steps[key[len("optimizer.task_steps.") :]] = int(value)
        elif key.startswith("optimizer.updates."):
            state.update_counts[key[len("optimizer.updates.") :]] = int(value)
    state.buffers = {name: arr.copy() for name, arr in checkpoint.optimizer.items()}
    return state


def restore_model(checkpoint: Checkpoint) -> Tuple[PolyViT, OptimizerState, RunConfig]:
    """Rebuild the model from the stored config and overwrite every parameter with the stored tensors."""
    config = checkpoint_config(checkpoint)
    model = build_polyvit(config)
    params = model.parameters()
    missing = sorted(set(params) - set(checkpoint.tensors))
    extra = sorted(set(checkpoint.tensors) - set(params))
    if missing or extra:
        raise CheckpointError(f"tensor names do not match the model (missing {missing[:3]}, unexpected {extra[:3]})")
    for name, p in params.items():
        arr = checkpoint.tensors[name]
        if arr.shape != p.shape or arr.dtype != p.dtype:
            raise CheckpointError(f"{name}: stored {arr.dtype}{arr.shape} vs model {p.dtype}{p.shape}")
        p.assign(arr)
    state = optimizer_state(checkpoint)
    unknown: List[str] = sorted(set(state.buffers) - set(params))
    if unknown:
        raise CheckpointError(f"momentum buffers for unknown parameters {unknown[:3]}")
    return model, state, config


def load_checkpoint(path: Union[str, Path]) -> Tuple[PolyViT, OptimizerState, RunConfig]:
    model, state, config = restore_model(read_checkpoint(path))
    logger.info("[Checkpoint] loaded %s (%d tensors)", path, len(model.parameters()))
    return model, state, config
