# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution and pooling kernels.

Same contracts as :mod:`routedpg.kernels.numpy_backend`; explicit loops keep
per-call overhead low for the small single-sample arrays a rollout produces.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w, double[::1] b):
    cdef Py_ssize_t n_batch = x.shape[0], channels = x.shape[1]
    cdef Py_ssize_t height = x.shape[2], width = x.shape[3]
    cdef Py_ssize_t filters = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t out_h = height - kh + 1, out_w = width - kw + 1
    out = np.empty((n_batch, filters, out_h, out_w), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t n, f, c, i, j, p, q
    cdef double acc
    for n in range(n_batch):
        for f in range(filters):
            for p in range(out_h):
                for q in range(out_w):
                    acc = b[f]
                    for c in range(channels):
                        for i in range(kh):
                            for j in range(kw):
                                acc = acc + x[n, c, p + i, q + j] * w[f, c, i, j]
                    y[n, f, p, q] = acc
    return out


def conv2d_backward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                    double[:, :, :, ::1] gy):
    cdef Py_ssize_t n_batch = x.shape[0], channels = x.shape[1]
    cdef Py_ssize_t height = x.shape[2], width = x.shape[3]
    cdef Py_ssize_t filters = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t out_h = height - kh + 1, out_w = width - kw + 1
    gx_arr = np.zeros((n_batch, channels, height, width), dtype=np.float64)
    gw_arr = np.zeros((filters, channels, kh, kw), dtype=np.float64)
    gb_arr = np.zeros(filters, dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t n, f, c, i, j, p, q
    cdef double g
    for n in range(n_batch):
        for f in range(filters):
            for p in range(out_h):
                for q in range(out_w):
                    g = gy[n, f, p, q]
                    gb[f] += g
                    for c in range(channels):
                        for i in range(kh):
                            for j in range(kw):
                                gw[f, c, i, j] += g * x[n, c, p + i, q + j]
                                gx[n, c, p + i, q + j] += g * w[f, c, i, j]
    return gx_arr, gw_arr, gb_arr


def maxpool2d_forward(double[:, :, :, ::1] x, Py_ssize_t pool_h,
                      Py_ssize_t pool_w, Py_ssize_t stride):
    cdef Py_ssize_t n_batch = x.shape[0], channels = x.shape[1]
    cdef Py_ssize_t height = x.shape[2], width = x.shape[3]
    cdef Py_ssize_t out_h = (height - pool_h) // stride + 1
    cdef Py_ssize_t out_w = (width - pool_w) // stride + 1
    y_arr = np.empty((n_batch, channels, out_h, out_w), dtype=np.float64)
    idx_arr = np.empty((n_batch, channels, out_h, out_w), dtype=np.int64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef long long[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t n, c, p, q, i, j, r0, c0, best_i, best_j
    cdef double best, v
    for n in range(n_batch):
        for c in range(channels):
            for p in range(out_h):
                for q in range(out_w):
                    r0 = p * stride
                    c0 = q * stride
                    best = x[n, c, r0, c0]
                    best_i = r0
                    best_j = c0
                    for i in range(pool_h):
                        for j in range(pool_w):
                            v = x[n, c, r0 + i, c0 + j]
                            if v > best:
                                best = v
                                best_i = r0 + i
                                best_j = c0 + j
                    y[n, c, p, q] = best
                    idx[n, c, p, q] = best_i * width + best_j
    return y_arr, idx_arr


def maxpool2d_backward(double[:, :, :, ::1] gy, long long[:, :, :, ::1] idx,
                       Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t n_batch = gy.shape[0], channels = gy.shape[1]
    cdef Py_ssize_t out_h = gy.shape[2], out_w = gy.shape[3]
    gx_arr = np.zeros((n_batch, channels, height * width), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t n, c, p, q
    for n in range(n_batch):
        for c in range(channels):
            for p in range(out_h):
                for q in range(out_w):
                    gx[n, c, idx[n, c, p, q]] += gy[n, c, p, q]
    return gx_arr.reshape(n_batch, channels, height, width)
