"""Pure numpy implementations of the convolution and pooling kernels.

Shared array contract with the compiled backend:

* conv2d: ``x`` (B, C, H, W), ``w`` (F, C, kh, kw), ``b`` (F,); valid
  cross-correlation, stride 1.
* maxpool2d: windows scanned row-major, ties broken by the first index;
  the forward returns flat spatial argmax indices for gradient routing.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    kh, kw = w.shape[2], w.shape[3]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    y = np.einsum("bchwij,fcij->bfhw", windows, w, optimize=True)
    y += b[None, :, None, None]
    return np.ascontiguousarray(y)


def conv2d_backward(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    kh, kw = w.shape[2], w.shape[3]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    gw = np.einsum("bchwij,bfhw->fcij", windows, gy, optimize=True)
    gb = gy.sum(axis=(0, 2, 3))
    # d/dx is the full correlation of gy with the flipped kernel.
    pad = np.pad(gy, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    gywin = sliding_window_view(pad, (kh, kw), axis=(2, 3))
    gx = np.einsum("bfhwij,fcij->bchw", gywin, w[:, :, ::-1, ::-1], optimize=True)
    return (np.ascontiguousarray(gx), np.ascontiguousarray(gw),
            np.ascontiguousarray(gb))


def maxpool2d_forward(x: np.ndarray, pool_h: int, pool_w: int, stride: int):
    n_batch, channels, height, width = x.shape
    out_h = (height - pool_h) // stride + 1
    out_w = (width - pool_w) // stride + 1
    windows = sliding_window_view(x, (pool_h, pool_w), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = windows.reshape(n_batch, channels, out_h, out_w, pool_h * pool_w)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    di, dj = np.divmod(arg, pool_w)
    rows = np.arange(out_h)[None, None, :, None] * stride + di
    cols = np.arange(out_w)[None, None, None, :] * stride + dj
    idx = rows * width + cols
    return np.ascontiguousarray(y), np.ascontiguousarray(idx.astype(np.int64))


def maxpool2d_backward(gy: np.ndarray, idx: np.ndarray, height: int, width: int) -> np.ndarray:
    n_batch, channels = gy.shape[0], gy.shape[1]
    gx = np.zeros((n_batch * channels, height * width))
    rows = np.repeat(np.arange(n_batch * channels), gy[0, 0].size)
    np.add.at(gx, (rows, idx.reshape(-1)), gy.reshape(-1))
    return gx.reshape(n_batch, channels, height, width)
