"""
`PVDS` flat binary dataset format (all integers little-endian).

    magic     b"PVDS"
    version   u32
    modality  u8   (0 image, 1 video, 2 audio)
    rank      u8
    extents   rank × u64   (per-example input shape)
    classes   u32
    multilabel u8
    count     u64
    records   count × (prod(extents) × f32 values, label)

A label is a u32 class id, or `classes` bytes of 0/1 for multilabel datasets.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from persistence.atomic import atomic_write_bytes

from .synthetic import Dataset

MAGIC = b"PVDS"
VERSION = 1
MODALITY_TAGS = {"image": 0, "video": 1, "audio": 2}
_TAG_TO_MODALITY = {v: k for k, v in MODALITY_TAGS.items()}


class DatasetFormatError(ValueError):
    """A PVDS payload is malformed or uses an unsupported version."""


def _record_dtype(shape: Tuple[int, ...], num_classes: int, multilabel: bool) -> np.dtype:
    label = ("y", "u1", (num_classes,)) if multilabel else ("y", "<u4")
    return np.dtype([("x", "<f4", shape), label])


def encode_dataset(dataset: Dataset, modality: str) -> bytes:
    if modality not in MODALITY_TAGS:
        raise DatasetFormatError(f"unknown modality {modality!r}")
    shape = tuple(int(n) for n in dataset.inputs.shape[1:])
    header = MAGIC + struct.pack("<IBB", VERSION, MODALITY_TAGS[modality], len(shape))
    header += struct.pack(f"<{len(shape)}Q", *shape)
    header += struct.pack("<IBQ", dataset.num_classes, int(dataset.multilabel), len(dataset))
    records = np.zeros(len(dataset), dtype=_record_dtype(shape, dataset.num_classes, dataset.multilabel))
    records["x"] = dataset.inputs
    records["y"] = dataset.labels
    return header + records.tobytes()


def decode_dataset(payload: bytes) -> Tuple[str, Dataset]:
    """Inverse of `encode_dataset`; returns (modality, dataset)."""
    view = memoryview(payload)
    if bytes(view[:4]) != MAGIC:
        raise DatasetFormatError(f"bad magic {bytes(view[:4])!r}; expected {MAGIC!r}")
    try:
        version, tag, rank = struct.unpack_from("<IBB", view, 4)
        if version != VERSION:
            raise DatasetFormatError(f"unsupported PVDS version {version}; this build reads {VERSION}")
        offset = 10
        shape = struct.unpack_from(f"<{rank}Q", view, offset)
        offset += 8 * rank
        num_classes, multilabel, count = struct.unpack_from("<IBQ", view, offset)
        offset += 13
    except struct.error as e:
        raise DatasetFormatError(f"truncated PVDS header: {e}") from None
    if tag not in _TAG_TO_MODALITY:
        raise DatasetFormatError(f"unknown modality tag {tag}")
    dtype = _record_dtype(tuple(shape), num_classes, bool(multilabel))
    expected = offset + count * dtype.itemsize
    if len(payload) != expected:
        raise DatasetFormatError(f"PVDS payload is {len(payload)} bytes; header implies {expected}")
    records = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
    labels = records["y"].astype(np.uint8 if multilabel else np.int64)
    if not multilabel and count and int(labels.max()) >= num_classes:
        raise DatasetFormatError(f"label {int(labels.max())} out of range for {num_classes} classes")
    dataset = Dataset(
        inputs=np.array(records["x"], dtype=np.float32),
        labels=labels,
        num_classes=num_classes,
        multilabel=bool(multilabel),
    )
    return _TAG_TO_MODALITY[tag], dataset


def write_dataset(path: Union[str, Path], dataset: Dataset, modality: str) -> None:
    atomic_write_bytes(Path(path), encode_dataset(dataset, modality))


def read_dataset(path: Union[str, Path]) -> Tuple[str, Dataset]:
    return decode_dataset(Path(path).read_bytes())
