"""Central finite-difference gradient checking (run at 64-bit)."""

from __future__ import annotations

from typing import Callable, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from .tensor import GradTape, Parameter, Tensor, backward

LossFn = Callable[[], Tensor]
Params = Union[Mapping[str, Parameter], Sequence[Parameter]]

DEFAULT_STEP = 1e-5
# Central differences at DEFAULT_STEP resolve a 64-bit loss to roughly 1e-10.
ZERO_GRADIENT_ATOL = 1e-8


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, *, atol: float = ZERO_GRADIENT_ATOL) -> float:
    """
    max|a−b| / max(max|a|, max|b|) over the whole tensor.

    When both sides stay within `atol` the gradient is zero to finite-difference precision and the
    absolute difference max|a−b| is returned instead.
    """
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    diff = float(np.abs(a - b).max(initial=0.0))
    if scale <= atol:
        return diff
    return diff / scale


def numeric_gradient(
    loss_fn: LossFn,
    param: Parameter,
    step: float = DEFAULT_STEP,
    *,
    indices: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Perturb entries of `param` by ±step and difference the loss. Restores the parameter.

    With `indices` (flat positions) only those entries are estimated; the rest stay zero.
    """
    original = param.numpy()
    grad = np.zeros(original.shape, dtype=np.float64)
    flat = original.reshape(-1)
    positions = range(flat.size) if indices is None else (int(i) for i in indices)
    try:
        for i in positions:
            probe = flat.copy()
            probe[i] = flat[i] + step
            param.assign(probe.reshape(original.shape))
            plus = loss_fn().item()
            probe[i] = flat[i] - step
            param.assign(probe.reshape(original.shape))
            minus = loss_fn().item()
            grad.reshape(-1)[i] = (plus - minus) / (2.0 * step)
    finally:
        param.assign(original)
    return grad


def _named(params: Params) -> Dict[str, Parameter]:
    if isinstance(params, Mapping):
        return dict(params)
    return {p.name or str(i): p for i, p in enumerate(params)}


def analytic_gradients(loss_fn: LossFn, params: Params) -> Dict[str, np.ndarray]:
    named = _named(params)
    with GradTape() as tape:
        loss = loss_fn()
    grads = backward(tape, loss)
    return {name: np.array(grads[p]) for name, p in named.items()}


def check_gradients(
    loss_fn: LossFn,
    params: Params,
    step: float = DEFAULT_STEP,
    *,
    max_entries: Optional[int] = None,
    seed: int = 0,
    atol: float = ZERO_GRADIENT_ATOL,
) -> Dict[str, float]:
    """
    Return the max relative error per parameter name.

    `max_entries` caps the finite-difference work per tensor to a seeded sample of its entries.
    """
    named = _named(params)
    analytic = analytic_gradients(loss_fn, named)
    rng = np.random.default_rng(seed)
    errors: Dict[str, float] = {}
    for name, p in named.items():
        if max_entries is None or p.size <= max_entries:
            errors[name] = max_relative_error(analytic[name], numeric_gradient(loss_fn, p, step), atol=atol)
            continue
        idx = np.sort(rng.choice(p.size, size=max_entries, replace=False))
        numeric = numeric_gradient(loss_fn, p, step, indices=idx)
        errors[name] = max_relative_error(analytic[name].reshape(-1)[idx], numeric.reshape(-1)[idx], atol=atol)
    return errors
