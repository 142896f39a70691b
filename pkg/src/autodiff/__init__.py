"""Minimal dense tensor engine with reverse-mode gradients."""

from . import ops
from .gradcheck import check_gradients, max_relative_error, numeric_gradient
from .tensor import (
    GradientError,
    Gradients,
    GradTape,
    Parameter,
    ShapeError,
    Tensor,
    backward,
)

__all__ = [
    "GradTape",
    "GradientError",
    "Gradients",
    "Parameter",
    "ShapeError",
    "Tensor",
    "backward",
    "check_gradients",
    "max_relative_error",
    "numeric_gradient",
    "ops",
]
