"""
Differentiable operations over `Tensor`.

Each op computes its forward value with numpy and registers a closure that maps the output
gradient to one gradient per input (or None for non-differentiable inputs).
"""

from __future__ import annotations

import math
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .tensor import ArrayLike, ShapeError, Tensor, record_op

Axis = Optional[Union[int, Tuple[int, ...]]]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def as_tensor(value: Union[Tensor, ArrayLike], *, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=like.dtype if like is not None else None)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    keep = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# --- elementwise ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("add", a, b)
    return record_op(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("sub", a, b)
    return record_op(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("mul", a, b)
    return record_op(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def neg(x: Tensor) -> Tensor:
    return record_op("neg", -x.data, (x,), lambda g: (-g,))


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a constant scalar."""
    c = x.dtype.type(c)
    return record_op("scale", x.data * c, (x,), lambda g: (g * c,))


# --- linear algebra ------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two axes with numpy batch broadcasting on the leading axes.

    Gradients: d/da = g·bᵀ, d/db = aᵀ·g, each summed back over broadcast batch axes.
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: batch axes of {a.shape} and {b.shape} do not broadcast") from None

    def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return record_op("matmul", np.matmul(a.data, b.data), (a, b), _backward)


# --- shape ---------------------------------------------------------------------------------


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}") from None
    return record_op("reshape", out.copy(), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record_op("transpose", np.transpose(x.data, axes).copy(), (x,), lambda g: (np.transpose(g, inverse),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {x.shape} to {shape}") from None
    return record_op("broadcast_to", out, (x,), lambda g: (unbroadcast(g, x.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise ShapeError("concat: no tensors given")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} disagree off axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.split(g, bounds, axis=axis))

    return record_op("concat", out, tensors, _backward)


def index(x: Tensor, key: Any) -> Tensor:
    """Basic/advanced indexing; the backward scatters with accumulation."""

    def _backward(g: np.ndarray) -> Tuple[np.ndarray]:
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, key, g)
        return (gx,)

    return record_op("index", np.array(x.data[key], copy=True), (x,), _backward)


# --- reductions ----------------------------------------------------------------------------


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        axes = tuple(a % len(shape) for a in axes)
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))
    return record_op("sum", out, (x,), lambda g: (np.array(_expand_reduced(g, x.shape, axis, keepdims)),))


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    out = np.asarray(x.data.mean(axis=axis, keepdims=keepdims))
    count = x.size // max(out.size, 1)
    return record_op(
        "mean",
        out,
        (x,),
        lambda g: (np.array(_expand_reduced(g, x.shape, axis, keepdims)) / count,),
    )


# --- nonlinearities ------------------------------------------------------------------------


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis with population variance, then apply gamma/beta."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: last extent {d} vs gamma {gamma.shape} / beta {beta.shape}")
    if eps < 0:
        raise ValueError(f"layer_norm: eps must be non-negative, got {eps}")
    xc = x.data - x.data.mean(axis=-1, keepdims=True)
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        lead = tuple(range(g.ndim - 1))
        dxhat = g * gamma.data
        dx = inv * (
            dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return record_op("layer_norm", out, (x, gamma, beta), _backward)


def gelu(x: Tensor) -> Tensor:
    """x·Φ(x) with Φ the exact standard normal CDF."""
    cdf = special.ndtr(x.data)

    def _backward(g: np.ndarray) -> Tuple[np.ndarray]:
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
        return (g * (cdf + x.data * pdf),)

    return record_op("gelu", x.data * cdf, (x,), _backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def _backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return record_op("softmax", s, (x,), _backward)


# --- losses --------------------------------------------------------------------------------


def softmax_cross_entropy(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean over the batch of −Σ_c t_c·log softmax(z)_c. Targets may be soft (mixup)."""
    if logits.shape != targets.shape or logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    b = logits.shape[0]
    logp = special.log_softmax(logits.data, axis=-1)
    value = np.asarray(-(targets.data * logp).sum() / b, dtype=logits.dtype)

    def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = np.exp(logp)
        t = targets.data
        dz = (p * t.sum(axis=-1, keepdims=True) - t) * (g / b)
        return dz.astype(logits.dtype), (-logp * (g / b)).astype(targets.dtype)

    return record_op("softmax_cross_entropy", value, (logits, targets), _backward)


def sigmoid_binary_cross_entropy(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean over batch and classes of the per-class sigmoid binary cross-entropy."""
    if logits.shape != targets.shape:
        raise ShapeError(f"sigmoid_binary_cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    z = logits.data
    t = targets.data
    n = max(logits.size, 1)
    per = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    value = np.asarray(per.sum() / n, dtype=logits.dtype)

    def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        dz = (special.expit(z) - t) * (g / n)
        return dz.astype(logits.dtype), (-z * (g / n)).astype(targets.dtype)

    return record_op("sigmoid_binary_cross_entropy", value, (logits, targets), _backward)
