"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

The tape is rebuilt per forward pass (define-by-run).  Tensors created with
``requires_grad=True`` are leaves; every op records a node on the active tape
whenever one of its inputs is differentiable, and ``Tape.backward`` replays
the recorded rules in reverse to fill leaf gradients.

Tensors detached from any tape are plain immutable values and safe to share
across threads; a tape and the tensors recorded on it belong to one thread.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operands do not conform to an op's shape rule."""


def _fmt(op: str, *shapes) -> str:
    return f"{op}: incompatible shapes " + " and ".join(str(tuple(s)) for s in shapes)


class Tensor:
    """A contiguous row-major float64 array, optionally tracked by a tape."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id: Optional[int] = None  # handle into the active tape; None for constants
        self._tape: Optional["Tape"] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # Operator sugar over the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)


class _Node:
    __slots__ = ("op", "input_ids", "output_id", "backward")

    def __init__(self, op, input_ids, output_id, backward):
        self.op = op
        self.input_ids = input_ids
        self.output_id = output_id
        self.backward = backward


_TAPE_STACK: list["Tape"] = []


def active_tape() -> Optional["Tape"]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    """Ordered record of operations; inputs of each node precede it."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._tensors: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self, "tapes must unwind in LIFO order"

    def _assign_id(self, t: Tensor) -> int:
        if t._tape is self and t.node_id is not None:
            return t.node_id
        t._tape = self
        t.node_id = len(self._tensors)
        self._tensors.append(t)
        return t.node_id

    def _tracked(self, t: Tensor) -> bool:
        return t.requires_grad or (t._tape is self and t.node_id is not None)

    def record(self, op: str, out: Tensor, inputs: Sequence[Tensor],
               backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> None:
        """Append one operation; ``backward`` maps d(out) to per-input grads."""
        input_ids = [self._assign_id(t) for t in inputs]
        output_id = self._assign_id(out)
        self.nodes.append(_Node(op, input_ids, output_id, backward))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Accumulate d(loss)/d(leaf) for every differentiable leaf.

        Returns a map from leaf tensor to its gradient and also fills each
        leaf's ``.grad``.  The tape is reset afterwards.
        """
        if not self.nodes:
            raise ValueError("backward on empty tape")
        if loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        if loss._tape is not self or loss.node_id is None:
            raise ValueError("loss was not produced on this tape")

        grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            gout = grads.get(node.output_id)
            if gout is None:
                continue
            gins = node.backward(gout)
            for tid, g in zip(node.input_ids, gins):
                if g is None:
                    continue
                acc = grads.get(tid)
                grads[tid] = g if acc is None else acc + g

        result: dict[Tensor, np.ndarray] = {}
        for t in self._tensors:
            if t.requires_grad and t.node_id in grads:
                g = grads[t.node_id]
                t.grad = g if t.grad is None else t.grad + g
                result[t] = g
            t.node_id = None
            t._tape = None
        self.nodes.clear()
        self._tensors.clear()
        return result


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _maybe_record(op, out, inputs, backward) -> Tensor:
    tape = active_tape()
    if tape is not None and any(tape._tracked(t) for t in inputs):
        tape.record(op, out, inputs, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcast on leading axes)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(_fmt("matmul", a.shape, b.shape))
    out = Tensor(np.matmul(a.data, b.data))

    def backward(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _maybe_record("matmul", out, (a, b), backward)


def add(a, b) -> Tensor:
    """Elementwise add; the only broadcast allowed is a 1-D bias on the last axis."""
    a, b = _as_tensor(a), _as_tensor(b)
    bias = b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0] and a.shape != b.shape
    if not bias and a.shape != b.shape:
        raise ShapeError(_fmt("add", a.shape, b.shape))
    out = Tensor(a.data + b.data)

    def backward(g):
        gb = g.reshape(-1, b.shape[0]).sum(axis=0) if bias else g
        return g, gb

    return _maybe_record("add", out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(_fmt("sub", a.shape, b.shape))
    out = Tensor(a.data - b.data)
    return _maybe_record("sub", out, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(_fmt("mul", a.shape, b.shape))
    out = Tensor(a.data * b.data)
    return _maybe_record("mul", out, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.data * c)
    return _maybe_record("scale", out, (a,), lambda g: (g * c,))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    # Split by sign so exp never overflows.
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y)
    return _maybe_record("sigmoid", out, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)
    out = Tensor(y)
    return _maybe_record("tanh", out, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0))
    mask = a.data > 0
    return _maybe_record("relu", out, (a,), lambda g: (g * mask,))


def softmax_rows(a) -> Tensor:
    """Softmax along the last axis, with per-row max subtraction for stability."""
    a = _as_tensor(a)
    if a.ndim < 1:
        raise ShapeError(_fmt("softmax-rows", a.shape))
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)

    def backward(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - dot),)

    return _maybe_record("softmax-rows", out, (a,), backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: no inputs")
    try:
        out = Tensor(np.concatenate([t.data for t in ts], axis=axis))
    except ValueError:
        raise ShapeError(_fmt("concat", *(t.shape for t in ts))) from None
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _maybe_record("concat", out, ts, backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    try:
        out = Tensor(a.data.reshape(shape))
    except ValueError:
        raise ShapeError(_fmt("reshape", a.shape, shape)) from None
    old = a.shape
    return _maybe_record("reshape", out, (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.transpose(a.data, axes))
    if axes is None:
        inverse = None
    else:
        inverse = np.argsort(axes)
    return _maybe_record("transpose", out, (a,),
                         lambda g: (np.transpose(g, inverse),))


def swap_last_axes(a) -> Tensor:
    """Transpose the trailing two axes (matrix transpose over leading batch dims)."""
    a = _as_tensor(a)
    if a.ndim < 2:
        raise ShapeError(_fmt("transpose", a.shape))
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _maybe_record("sum", out, (a,), backward)


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))
    shape = a.shape
    count = a.data.size if axis is None else shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape) / count,)

    return _maybe_record("mean", out, (a,), backward)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    if not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"slice: range [{start}:{stop}] out of bounds for axis "
                         f"{axis} of shape {tuple(a.shape)}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(a.data[index].copy())
    shape = a.shape

    def backward(g):
        full = np.zeros(shape)
        full[index] = g
        return (full,)

    return _maybe_record("slice", out, (a,), backward)


def maximum(a, b) -> Tensor:
    """Elementwise max; on ties the gradient routes to the first input."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(_fmt("elementwise-max", a.shape, b.shape))
    out = Tensor(np.maximum(a.data, b.data))
    take_a = a.data >= b.data
    return _maybe_record("elementwise-max", out, (a, b),
                         lambda g: (g * take_a, g * ~take_a))


def from_op(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    """Register a custom primitive (used by the neural layers for conv, pool, ...)."""
    out = Tensor(data)
    return _maybe_record(op, out, [_as_tensor(t) for t in inputs], backward)


_OP_REGISTRY: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "sub": sub,
    "scale": scale,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "softmax-rows": softmax_rows,
    "concat": concat,
    "reshape": reshape,
    "transpose": transpose,
    "sum": reduce_sum,
    "mean": reduce_mean,
    "slice": slice_axis,
    "elementwise-max": maximum,
}


def forward_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Dispatch one forward op by kind name; records on the active tape."""
    try:
        fn = _OP_REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}; known: {sorted(_OP_REGISTRY)}") from None
    if kind == "concat":
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)
