"""On-disk formats: PVCK checkpoints, text run configs, atomic file writes."""

from .atomic import atomic_write_bytes
from .checkpoint import (
    Checkpoint,
    CheckpointError,
    checkpoint_config,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    optimizer_state,
    read_checkpoint,
    restore_model,
    run_metadata,
    save_checkpoint,
)
from .config_text import (
    config_from_items,
    config_items,
    dump_config_text,
    load_config,
    parse_config_text,
    preset_names,
)

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "atomic_write_bytes",
    "checkpoint_config",
    "config_from_items",
    "config_items",
    "decode_checkpoint",
    "dump_config_text",
    "encode_checkpoint",
    "load_checkpoint",
    "load_config",
    "optimizer_state",
    "parse_config_text",
    "preset_names",
    "read_checkpoint",
    "restore_model",
    "run_metadata",
    "save_checkpoint",
]
