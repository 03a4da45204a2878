"""Convolution and pooling kernels with a compiled fast path.

The compiled extension is preferred when it imported cleanly; the numpy
implementation is the fallback.  ``ROUTEDPG_KERNELS=compiled|fallback``
forces one side (``compiled`` raises if the extension is missing).  The
active choice is exposed as ``BACKEND`` and recorded in run manifests.
"""

from __future__ import annotations

import importlib
import os

from . import numpy_backend


def _import_compiled():
    try:
        return importlib.import_module("routedpg.kernels._compiled")
    except ImportError:
        return None


_requested = os.environ.get("ROUTEDPG_KERNELS", "auto").strip().lower()
if _requested not in ("auto", "compiled", "fallback"):
    raise ValueError(
        f"ROUTEDPG_KERNELS must be 'compiled' or 'fallback', got {_requested!r}"
    )

_ext = None if _requested == "fallback" else _import_compiled()
if _requested == "compiled" and _ext is None:
    raise ImportError(
        "ROUTEDPG_KERNELS=compiled but the compiled extension is not "
        "available; rebuild the package or unset the variable"
    )

if _ext is not None:
    BACKEND = "compiled"
    _active = _ext
else:
    BACKEND = "fallback"
    _active = numpy_backend

conv2d_forward = _active.conv2d_forward
conv2d_backward = _active.conv2d_backward
maxpool2d_forward = _active.maxpool2d_forward
maxpool2d_backward = _active.maxpool2d_backward


def available_backends() -> dict:
    """Name -> module for every importable backend (used by the benchmark)."""
    out = {"fallback": numpy_backend}
    ext = _ext if _ext is not None else _import_compiled()
    if ext is not None:
        out["compiled"] = ext
    return out


__all__ = [
    "BACKEND",
    "available_backends",
    "conv2d_backward",
    "conv2d_forward",
    "maxpool2d_backward",
    "maxpool2d_forward",
]
