"""Adam optimizer with bias correction, one moment pair per parameter."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor


class AdamState:
    """First/second moment buffers mirroring a fixed parameter list.

    ``t`` increases by one per step; moments are keyed positionally, so the
    parameter list passed to ``adam_step`` must match the one used here.
    """

    def __init__(self, params: Sequence[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params: Sequence[Tensor], grads, state: AdamState) -> None:
    """Apply one in-place Adam update.

    ``grads`` is either a mapping from parameter tensor to gradient array
    (as returned by ``Tape.backward``) or a sequence aligned with ``params``.
    """
    if isinstance(grads, dict):
        try:
            grads = [grads[p] for p in params]
        except KeyError:
            raise KeyError("gradient map does not cover all parameters") from None
    if len(grads) != len(params):
        raise ValueError(f"got {len(grads)} gradients for {len(params)} parameters")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ValueError(f"parameter {i}: gradient shape {g.shape} != "
                             f"parameter shape {p.data.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
