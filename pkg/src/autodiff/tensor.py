"""
Dense tensors and the gradient tape.

A `Tensor` wraps a read-only numpy array. Operations in `autodiff.ops` append one record per
executed op to the innermost active `GradTape`; `backward` replays those records in reverse.

Usage:

    with GradTape() as tape:
        loss = ops.sum(ops.matmul(x, w))
    grads = backward(tape, loss)
    grads[w]  # ndarray shaped like w
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

DEFAULT_DTYPE = np.float32
SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class ShapeError(ValueError):
    """Operand shapes are incompatible for an operation."""


class GradientError(RuntimeError):
    """The backward pass cannot be run for the given tape/loss."""


def _as_array(data: ArrayLike, dtype: Optional[np.dtype]) -> np.ndarray:
    if dtype is None:
        if isinstance(data, np.ndarray) and data.dtype in SUPPORTED_DTYPES:
            dtype = data.dtype
        else:
            dtype = DEFAULT_DTYPE
    arr = np.array(data, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


class Tensor:
    """Immutable n-dimensional real array that may participate in a differentiation graph."""

    __slots__ = ("_data", "requires_grad", "name", "__weakref__")

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        dtype: Optional[np.dtype] = None,
        name: str = "",
    ) -> None:
        self._data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray, *, requires_grad: bool) -> "Tensor":
        # Op outputs are fresh arrays; skip the defensive copy.
        out = cls.__new__(cls)
        arr.flags.writeable = False
        out._data = arr
        out.requires_grad = requires_grad
        out.name = ""
        return out

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self._data.shape)

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self._data.dtype

    @property
    def size(self) -> int:
        return int(self._data.size)

    def numpy(self) -> np.ndarray:
        return np.array(self._data, copy=True)

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self._data.reshape(()))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # Operator sugar; the implementations live in `ops`.
    def __add__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.add(self, ops.as_tensor(other, like=self))

    def __sub__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.sub(self, ops.as_tensor(other, like=self))

    def __mul__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.mul(self, ops.as_tensor(other, like=self))

    def __neg__(self) -> "Tensor":
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.matmul(self, other)


class Parameter(Tensor):
    """
    Trainable leaf tensor.

    The stored array is never modified in place; `assign` swaps in a new read-only array. This is the
    single mutation point used by optimizers and checkpoint loading.
    """

    __slots__ = ()

    def __init__(self, data: ArrayLike, *, dtype: Optional[np.dtype] = None, name: str = "") -> None:
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)

    def assign(self, value: np.ndarray) -> None:
        value = np.asarray(value)
        if value.shape != self._data.shape:
            raise ShapeError(f"cannot assign shape {value.shape} to parameter {self.name or '?'} of shape {self.shape}")
        self._data = _as_array(value, self._data.dtype)


@dataclass
class TapeRecord:
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn
    op: str


_local = threading.local()


def _tape_stack() -> List["GradTape"]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> Optional["GradTape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class GradTape:
    """Ordered record of executed ops. Confined to the thread that entered it."""

    def __init__(self) -> None:
        self.records: List[TapeRecord] = []
        self._produced: Dict[int, Tensor] = {}

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward_fn: BackwardFn) -> None:
        self.records.append(TapeRecord(inputs=inputs, output=output, backward=backward_fn, op=op))
        self._produced[id(output)] = output

    def produced(self, tensor: Tensor) -> bool:
        return self._produced.get(id(tensor)) is tensor

    def __len__(self) -> int:
        return len(self.records)


def record_op(
    op: str,
    out_data: np.ndarray,
    inputs: Tuple[Tensor, ...],
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap an op result and record it on the active tape when any input tracks gradients."""
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor._wrap(np.asarray(out_data), requires_grad=requires_grad)
    if requires_grad:
        tape = active_tape()
        if tape is not None:
            tape.record(op, inputs, out, backward_fn)
    return out


class Gradients:
    """
    Mapping from tracked tensors to gradient arrays.

    Looking up a tensor that lies on no path to the loss yields an all-zero array.
    """

    def __init__(self, grads: Dict[int, np.ndarray], leaves: Dict[int, Tensor]) -> None:
        self._grads = grads
        self._leaves = leaves

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        g = self._grads.get(id(tensor))
        if g is None:
            return np.zeros(tensor.shape, dtype=tensor.dtype)
        return g

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads and id(tensor) in self._leaves

    def parameters(self) -> Iterator[Parameter]:
        """Parameters that appeared as inputs on the tape, in first-use order."""
        for leaf in self._leaves.values():
            if isinstance(leaf, Parameter):
                yield leaf

    def __len__(self) -> int:
        return sum(1 for _ in self.parameters())


def backward(tape: GradTape, loss: Tensor) -> Gradients:
    """Replay `tape` in reverse from the scalar `loss` and return gradients for every leaf."""
    if loss.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.produced(loss):
        raise GradientError("loss was not produced on this tape")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=loss.dtype)}
    leaves: Dict[int, Tensor] = {}

    # Leaves in first-use order.
    for rec in tape.records:
        for inp in rec.inputs:
            if inp.requires_grad and not tape.produced(inp) and id(inp) not in leaves:
                leaves[id(inp)] = inp

    for rec in reversed(tape.records):
        g_out = grads.get(id(rec.output))
        if g_out is None:
            continue
        input_grads = rec.backward(g_out)
        for inp, g_in in zip(rec.inputs, input_grads):
            if g_in is None or not inp.requires_grad:
                continue
            if g_in.shape != inp.shape:
                raise GradientError(f"{rec.op}: gradient shape {g_in.shape} does not match input {inp.shape}")
            prev = grads.get(id(inp))
            grads[id(inp)] = g_in if prev is None else prev + g_in

    for leaf_id in leaves:
        grads.setdefault(leaf_id, np.zeros(leaves[leaf_id].shape, dtype=leaves[leaf_id].dtype))
    return Gradients({k: v for k, v in grads.items() if k in leaves}, leaves)
