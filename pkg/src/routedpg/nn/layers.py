"""Tape-aware neural layers.

Each layer owns its parameters as float64 Tensors and exposes

* ``params()``  -> ordered ``(name, Tensor)`` pairs (trainable),
* ``state_arrays()`` -> ordered ``(name, ndarray)`` pairs (non-trainable
  buffers such as batch-norm running statistics),
* ``param_count`` -> the number reported in the model summary; for batch
  norm this includes the running statistics,
* ``trainable_count`` -> trainable scalars only.

Convolution and max-pooling run through :mod:`routedpg.kernels` (compiled
when available) and are registered on the active tape as custom primitives.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .. import kernels as K
from ..autodiff import (
    ShapeError,
    Tensor,
    add,
    concat,
    from_op,
    matmul,
    mul,
    reduce_mean,
    relu,
    reshape,
    scale,
    sigmoid,
    slice_axis,
    softmax_rows,
    swap_last_axes,
    tanh,
)

__all__ = [
    "BatchNorm2d",
    "Conv2d",
    "Dense",
    "Dropout",
    "Lstm",
    "MaxPool2d",
    "TemporalAttention",
    "batchnorm2d",
    "conv2d",
    "dropout",
    "glorot_uniform",
    "maxpool2d",
]


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# functional primitives


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation, stride 1; x (B,C,H,W), weight (F,C,kh,kw)."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {weight.shape}")
    kh, kw = weight.shape[2], weight.shape[3]
    if x.shape[2] < kh or x.shape[3] < kw:
        raise ShapeError(
            f"conv2d: input spatial dims {x.shape[2:]} smaller than kernel ({kh}, {kw})"
        )
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(weight.data)
    y = K.conv2d_forward(xd, wd, np.ascontiguousarray(bias.data))

    def backward(g):
        return K.conv2d_backward(xd, wd, np.ascontiguousarray(g))

    return from_op("conv2d", y, (x, weight, bias), backward)


def maxpool2d(x: Tensor, pool_h: int, pool_w: int, stride: int) -> Tensor:
    """Per-window maximum; gradient routes to the first argmax in row-major scan."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d: expected 4-D input, got {x.shape}")
    if x.shape[2] < pool_h or x.shape[3] < pool_w:
        raise ShapeError(
            f"maxpool2d: input spatial dims {x.shape[2:]} smaller than pool "
            f"({pool_h}, {pool_w})"
        )
    height, width = x.shape[2], x.shape[3]
    y, idx = K.maxpool2d_forward(np.ascontiguousarray(x.data), pool_h, pool_w, stride)

    def backward(g):
        return (K.maxpool2d_backward(np.ascontiguousarray(g), idx, height, width),)

    return from_op("maxpool2d", y, (x,), backward)


def dropout(x: Tensor, rate: float, train: bool, rng: Optional[np.random.Generator]) -> Tensor:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) >= rate) / keep
    return from_op("dropout", x.data * mask, (x,), lambda g: (g * mask,))


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                running_var: np.ndarray, *, train: bool, momentum: float = 0.1,
                eps: float = 1e-5) -> Tensor:
    """Per-channel normalization of a (B,C,H,W) tensor.

    Training mode normalizes with the biased batch moments and updates the
    running statistics in place; eval mode uses the running statistics and
    never mutates them.
    """
    if x.ndim != 4 or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batchnorm: channel dim {x.shape} vs {gamma.shape}")
    axes = (0, 2, 3)
    col = (slice(None), None, None)  # broadcast a per-channel vector over B,H,W

    if train:
        n = x.data.size // x.shape[1]
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu[col]) * inv[col]
        unbiased = var * n / (n - 1) if n > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
        y = gamma.data[col] * xhat + beta.data[col]

        def backward(g):
            dbeta = g.sum(axis=axes)
            dgamma = (g * xhat).sum(axis=axes)
            gx = (gamma.data * inv)[col] * (g - (dbeta / n)[col] - xhat * (dgamma / n)[col])
            return gx, dgamma, dbeta

        return from_op("batchnorm", y, (x, gamma, beta), backward)

    inv = 1.0 / np.sqrt(running_var + eps)
    xhat = (x.data - running_mean[col]) * inv[col]
    y = gamma.data[col] * xhat + beta.data[col]
    sc = gamma.data * inv

    def backward(g):
        return g * sc[col], (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return from_op("batchnorm", y, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# layers


class Conv2d:
    def __init__(self, in_channels: int, filters: int, kernel: tuple,
                 rng: np.random.Generator):
        kh, kw = kernel
        fan_in = in_channels * kh * kw
        fan_out = filters * kh * kw
        self.weight = Tensor(glorot_uniform(rng, (filters, in_channels, kh, kw),
                                            fan_in, fan_out), requires_grad=True)
        self.bias = Tensor(np.zeros(filters), requires_grad=True)

    @property
    def param_count(self) -> int:
        return self.weight.data.size + self.bias.data.size

    trainable_count = param_count

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def state_arrays(self):
        return []

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias)


class BatchNorm2d:
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    @property
    def param_count(self) -> int:
        # Summary-table convention: trainable scale/shift plus running stats.
        return 4 * self.gamma.data.size

    @property
    def trainable_count(self) -> int:
        return 2 * self.gamma.data.size

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state_arrays(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return batchnorm2d(x, self.gamma, self.beta, self.running_mean,
                           self.running_var, train=train, momentum=self.momentum,
                           eps=self.eps)


class MaxPool2d:
    def __init__(self, pool: tuple, stride: int):
        self.pool = tuple(pool)
        self.stride = stride

    param_count = 0
    trainable_count = 0

    def params(self):
        return []

    def state_arrays(self):
        return []

    def __call__(self, x: Tensor) -> Tensor:
        return maxpool2d(x, self.pool[0], self.pool[1], self.stride)

    def out_shape(self, h: int, w: int) -> tuple:
        return ((h - self.pool[0]) // self.stride + 1,
                (w - self.pool[1]) // self.stride + 1)


class Dropout:
    def __init__(self, rate: float):
        self.rate = rate

    param_count = 0
    trainable_count = 0

    def params(self):
        return []

    def state_arrays(self):
        return []

    def __call__(self, x: Tensor, train: bool, rng: Optional[np.random.Generator]) -> Tensor:
        return dropout(x, self.rate, train, rng)


class Dense:
    """Affine map; ``init='small'`` draws weights and bias uniform in ±3e-3
    (the usual choice for heads whose outputs pass through a squashing
    function, keeping early outputs near the linear region)."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 init: str = "glorot"):
        if init == "glorot":
            w = glorot_uniform(rng, (in_features, out_features), in_features, out_features)
            b = np.zeros(out_features)
        elif init == "small":
            w = rng.uniform(-3e-3, 3e-3, size=(in_features, out_features))
            b = rng.uniform(-3e-3, 3e-3, size=out_features)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(b, requires_grad=True)

    @property
    def param_count(self) -> int:
        return self.weight.data.size + self.bias.data.size

    trainable_count = param_count

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def state_arrays(self):
        return []

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.weight), self.bias)


class Lstm:
    """Single-layer LSTM returning the full hidden-state sequence.

    Gates are packed input/forget/candidate/output along the last axis of the
    combined weight matrices; one shared bias vector covers all four gates,
    with the forget slice initialized to 1 so early training does not flush
    the cell state.
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        four_h = 4 * hidden_size
        self.w_in = Tensor(glorot_uniform(rng, (input_size, four_h), input_size, four_h),
                           requires_grad=True)
        self.w_rec = Tensor(glorot_uniform(rng, (hidden_size, four_h), hidden_size, four_h),
                            requires_grad=True)
        bias = np.zeros(four_h)
        bias[hidden_size:2 * hidden_size] = 1.0
        self.bias = Tensor(bias, requires_grad=True)

    @property
    def param_count(self) -> int:
        return self.w_in.data.size + self.w_rec.data.size + self.bias.data.size

    trainable_count = param_count

    def params(self):
        return [("w_in", self.w_in), ("w_rec", self.w_rec), ("bias", self.bias)]

    def state_arrays(self):
        return []

    def __call__(self, seq: Tensor) -> Tensor:
        """(B, T, input_size) -> all hidden states (B, T, hidden_size)."""
        if seq.ndim != 3 or seq.shape[2] != self.input_size:
            raise ShapeError(
                f"lstm: expected (batch, steps, {self.input_size}), got {seq.shape}"
            )
        n_batch, steps = seq.shape[0], seq.shape[1]
        hs_size = self.hidden_size
        h = Tensor(np.zeros((n_batch, hs_size)))
        c = Tensor(np.zeros((n_batch, hs_size)))
        outputs = []
        for t in range(steps):
            x_t = reshape(slice_axis(seq, 1, t, t + 1), (n_batch, self.input_size))
            z = add(add(matmul(x_t, self.w_in), matmul(h, self.w_rec)), self.bias)
            gate_in = sigmoid(slice_axis(z, 1, 0, hs_size))
            gate_forget = sigmoid(slice_axis(z, 1, hs_size, 2 * hs_size))
            candidate = tanh(slice_axis(z, 1, 2 * hs_size, 3 * hs_size))
            gate_out = sigmoid(slice_axis(z, 1, 3 * hs_size, 4 * hs_size))
            c = add(mul(gate_forget, c), mul(gate_in, candidate))
            h = mul(gate_out, tanh(c))
            outputs.append(reshape(h, (n_batch, 1, hs_size)))
        return concat(outputs, axis=1)


class TemporalAttention:
    """Scaled dot-product attention over a sequence of hidden states.

    Query/key/value projections default to (non-trainable) identity, so the
    layer contributes no parameters; scores are scaled by 1/sqrt(key width)
    before the row softmax.  ``__call__`` returns the last context row as the
    sequence embedding; ``context_matrix`` exposes the full context.
    """

    def __init__(self, d_model: int, d_e: Optional[int] = None, d_v: Optional[int] = None,
                 trainable: bool = False, rng: Optional[np.random.Generator] = None):
        self.d_model = d_model
        self.d_e = d_e if d_e is not None else d_model
        self.d_v = d_v if d_v is not None else d_model
        if trainable:
            if rng is None:
                raise ValueError("trainable attention projections need a random generator")
            self.w_query = Tensor(glorot_uniform(rng, (d_model, self.d_e), d_model, self.d_e),
                                  requires_grad=True)
            self.w_key = Tensor(glorot_uniform(rng, (d_model, self.d_e), d_model, self.d_e),
                                requires_grad=True)
            self.w_value = Tensor(glorot_uniform(rng, (d_model, self.d_v), d_model, self.d_v),
                                  requires_grad=True)
        else:
            if self.d_e != d_model or self.d_v != d_model:
                raise ValueError(
                    "identity projections require matching query/key/value widths"
                )
            self.w_query = self.w_key = self.w_value = None
        self.trainable = trainable

    @property
    def param_count(self) -> int:
        if not self.trainable:
            return 0
        return (self.w_query.data.size + self.w_key.data.size + self.w_value.data.size)

    @property
    def trainable_count(self) -> int:
        return self.param_count

    def params(self):
        if not self.trainable:
            return []
        return [("w_query", self.w_query), ("w_key", self.w_key), ("w_value", self.w_value)]

    def state_arrays(self):
        return []

    def set_projections(self, w_query, w_key, w_value) -> None:
        """Install explicit projection matrices (used by oracle checks)."""
        self.w_query = Tensor(w_query, requires_grad=self.trainable)
        self.w_key = Tensor(w_key, requires_grad=self.trainable)
        self.w_value = Tensor(w_value, requires_grad=self.trainable)

    def context_matrix(self, hidden: Tensor) -> Tensor:
        """(T, d_model) or (B, T, d_model) -> context (T, d_v) / (B, T, d_v)."""
        squeeze = hidden.ndim == 2
        if squeeze:
            hidden = reshape(hidden, (1,) + tuple(hidden.shape))
        if hidden.ndim != 3 or hidden.shape[2] != self.d_model:
            raise ShapeError(
                f"attention: expected (batch, steps, {self.d_model}), got {hidden.shape}"
            )
        if self.w_query is None:
            query = key = value = hidden
        else:
            query = matmul(hidden, self.w_query)
            key = matmul(hidden, self.w_key)
            value = matmul(hidden, self.w_value)
        scores = scale(matmul(query, swap_last_axes(key)), 1.0 / math.sqrt(self.d_e))
        weights = softmax_rows(scores)
        context = matmul(weights, value)
        if squeeze:
            return reshape(context, (context.shape[1], context.shape[2]))
        return context

    def __call__(self, hidden: Tensor) -> Tensor:
        """Return the last context row: (B, T, d_model) -> (B, d_v)."""
        squeeze = hidden.ndim == 2
        context = self.context_matrix(hidden if not squeeze
                                      else reshape(hidden, (1,) + tuple(hidden.shape)))
        steps = context.shape[1]
        last = reshape(slice_axis(context, 1, steps - 1, steps),
                       (context.shape[0], self.d_v))
        if squeeze:
            return reshape(last, (self.d_v,))
        return last
