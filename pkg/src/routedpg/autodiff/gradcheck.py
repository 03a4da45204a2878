"""Central finite-difference checking for anything built on the tape."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def numeric_gradient(loss_fn: Callable[[], Tensor], tensor: Tensor,
                     step: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn()`` w.r.t. every element of ``tensor``.

    ``loss_fn`` must close over ``tensor`` and return a scalar Tensor; it is
    evaluated off-tape.
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        up = loss_fn().item()
        flat[i] = keep - step
        down = loss_fn().item()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def max_relative_error(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor],
                       step: float = 1e-5) -> float:
    """Worst relative disagreement between tape and finite-difference gradients.

    Relative error uses a 1e-6 floor on the denominator so exactly-zero
    gradients compare cleanly.
    """
    with Tape() as tape:
        loss = loss_fn()
        grads = tape.backward(loss)
    worst = 0.0
    for t in tensors:
        analytic = grads.get(t)
        if analytic is None:
            analytic = np.zeros_like(t.data)
        numeric = numeric_gradient(loss_fn, t, step=step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
        t.zero_grad()
    return worst
