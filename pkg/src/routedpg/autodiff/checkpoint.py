"""Checkpoint files: a JSON manifest plus a flat little-endian float64 payload.

``save_checkpoint(path, params)`` writes ``<path>.json`` and ``<path>.bin``;
loading reverses it bit-exactly.
"""

from __future__ import annotations

import json
import os
from typing import Sequence

import numpy as np

_DTYPE = "<f8"


def save_checkpoint(path: str, params: Sequence[tuple[str, np.ndarray]]) -> None:
    """Write named arrays to ``path``.json / ``path``.bin (names must be unique)."""
    names = [name for name, _ in params]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter names in checkpoint")
    entries = []
    offset = 0
    chunks = []
    for name, array in params:
        array = np.ascontiguousarray(array, dtype=np.float64)
        entries.append({"name": name, "shape": list(array.shape), "offset": offset})
        payload = array.astype(_DTYPE, copy=False).tobytes()
        chunks.append(payload)
        offset += len(payload)
    manifest = {
        "format": "routedpg-checkpoint",
        "dtype": _DTYPE,
        "total_bytes": offset,
        "tensors": entries,
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    with open(path + ".bin", "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    """Read a checkpoint back; insertion order follows the manifest."""
    with open(path + ".json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "routedpg-checkpoint":
        raise ValueError(f"{path}.json is not a checkpoint manifest")
    size = os.path.getsize(path + ".bin")
    if size != manifest["total_bytes"]:
        raise ValueError(f"payload is {size} bytes, manifest says {manifest['total_bytes']}")
    with open(path + ".bin", "rb") as fh:
        blob = fh.read()
    out: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(blob, dtype=_DTYPE, count=count,
                              offset=entry["offset"]).reshape(shape)
        out[entry["name"]] = array.astype(np.float64)  # writable copy
    return out
