"""PolyViT model: tokenizers, shared/adaptor encoder, task heads, parameter accounting and weight transfer."""

from .errors import GeometryError, ModelError, TransferError
from .tokenizers import MODALITIES, ModalityGeometry, Tokenizer, init_tokenizer, patchify, seq_len
from .encoder import (
    EncoderLayerParams,
    EncoderStack,
    build_stack,
    encoder_layer,
    init_layer,
    layer_param_count,
    msa,
)
from .model import PolyViT, TaskHead, build_heads, build_polyvit, init_head
from .counting import ParamBreakdown, count_parameters, param_count, size_variants
from .transfer import (
    PretrainedViT,
    adapt_channels,
    assign_layers,
    collapse_3d_to_2d,
    derive_tokenizer,
    inflate_2d_to_3d,
    init_from_pretrained,
    interp_pos,
    pos_2d_to_video,
    pos_video_to_2d,
    synthetic_pretrained,
)

__all__ = [
    "MODALITIES",
    "EncoderLayerParams",
    "EncoderStack",
    "GeometryError",
    "ModalityGeometry",
    "ModelError",
    "ParamBreakdown",
    "PolyViT",
    "PretrainedViT",
    "TaskHead",
    "Tokenizer",
    "TransferError",
    "adapt_channels",
    "assign_layers",
    "build_heads",
    "build_polyvit",
    "build_stack",
    "collapse_3d_to_2d",
    "count_parameters",
    "derive_tokenizer",
    "encoder_layer",
    "inflate_2d_to_3d",
    "init_from_pretrained",
    "init_head",
    "init_layer",
    "init_tokenizer",
    "interp_pos",
    "layer_param_count",
    "msa",
    "param_count",
    "patchify",
    "pos_2d_to_video",
    "pos_video_to_2d",
    "seq_len",
    "size_variants",
    "synthetic_pretrained",
]
