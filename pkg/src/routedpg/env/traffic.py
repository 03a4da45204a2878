"""Synthetic traffic: gravity-model matrices, state packing, CSV round-trip.

Each step draws independent unit-mean exponential origin and destination
masses per node and sets demand(i, j) proportional to origin(i) * dest(j) for
i != j, then rescales the whole matrix so total demand equals the requested
fraction of total (bidirectional) link capacity.  An optional AR(1) blend of
the masses adds temporal correlation between consecutive steps.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .topology import Topology

__all__ = [
    "generate_traffic",
    "load_traffic_csv",
    "pack_state",
    "save_traffic_csv",
    "unpack_state",
]


def generate_traffic(topology: Topology, ilt: float, length: int,
                     seed: Union[int, np.random.SeedSequence, None] = 0,
                     rng: Optional[np.random.Generator] = None,
                     correlation: float = 0.0) -> np.ndarray:
    """Return a (length, N, N) demand sequence in Mbit/s.

    ``ilt`` is the intended-load fraction: every matrix sums to exactly
    ilt * total bidirectional capacity.  ``correlation`` in [0, 1) blends the
    node masses with the previous step's (AR(1)); 0 means independent steps.
    """
    if not 0.0 < ilt <= 1.0:
        raise ValueError(f"ilt must be in (0, 1], got {ilt}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if not 0.0 <= correlation < 1.0:
        raise ValueError(f"correlation must be in [0, 1), got {correlation}")
    if rng is None:
        rng = np.random.default_rng(seed)

    n = topology.n_nodes
    target = ilt * topology.total_capacity_mbps
    off_diag = ~np.eye(n, dtype=bool)
    out = np.empty((length, n, n))
    origin = dest = None
    for t in range(length):
        o = rng.exponential(1.0, size=n)
        d = rng.exponential(1.0, size=n)
        if correlation > 0.0 and origin is not None:
            o = correlation * origin + (1.0 - correlation) * o
            d = correlation * dest + (1.0 - correlation) * d
        origin, dest = o, d
        tm = np.outer(o, d) * off_diag
        tm *= target / tm.sum()
        out[t] = tm
    return out


def pack_state(tm: np.ndarray) -> np.ndarray:
    """Pack an N x N zero-diagonal demand matrix into (N-1) x N.

    Column j lists the demands toward node j from every other node in
    ascending source order; the packing is a bijection on the off-diagonal
    entries.
    """
    tm = np.asarray(tm, dtype=np.float64)
    n = tm.shape[0]
    if tm.ndim != 2 or tm.shape[1] != n:
        raise ValueError(f"expected a square matrix, got {tm.shape}")
    if np.any(tm.diagonal() != 0.0):
        raise ValueError("demand matrix has nonzero diagonal entries")
    out = np.empty((n - 1, n))
    for j in range(n):
        col = np.concatenate([tm[:j, j], tm[j + 1:, j]])
        out[:, j] = col
    return out


def unpack_state(packed: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_state`."""
    packed = np.asarray(packed, dtype=np.float64)
    n = packed.shape[1]
    if packed.ndim != 2 or packed.shape[0] != n - 1:
        raise ValueError(f"expected shape ({n - 1}, {n}), got {packed.shape}")
    tm = np.zeros((n, n))
    for j in range(n):
        tm[:j, j] = packed[:j, j]
        tm[j + 1:, j] = packed[j:, j]
    return tm


def save_traffic_csv(path: Union[str, Path], traffic: np.ndarray) -> None:
    """Write a (T, N, N) sequence as rows (step, src, dst, mbps).

    Zero demands are skipped; values are written with ``repr`` so a
    round-trip through :func:`load_traffic_csv` is bit-identical.
    """
    traffic = np.asarray(traffic, dtype=np.float64)
    steps, n = traffic.shape[0], traffic.shape[1]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "src", "dst", "mbps"])
        for t in range(steps):
            for i in range(n):
                for j in range(n):
                    v = traffic[t, i, j]
                    if v != 0.0:
                        writer.writerow([t, i, j, repr(v)])
        # trailer records the full shape so all-zero tails survive the trip
        writer.writerow(["shape", steps, n, n])


def load_traffic_csv(path: Union[str, Path]) -> np.ndarray:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["step", "src", "dst", "mbps"]:
            raise ValueError(f"unrecognized traffic CSV header: {header}")
        entries = []
        shape = None
        for row in reader:
            if not row:
                continue
            if row[0] == "shape":
                shape = (int(row[1]), int(row[2]), int(row[3]))
                continue
            entries.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
    if shape is None:
        raise ValueError("traffic CSV is missing its shape trailer")
    out = np.zeros(shape)
    for t, i, j, v in entries:
        out[t, i, j] = v
    return out
