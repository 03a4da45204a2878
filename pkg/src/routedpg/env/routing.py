"""Action decoding: per-link weights -> minimum-weight paths for all pairs.

The search keeps whole node sequences in the heap so that exact cost ties
resolve to the lexicographically smallest path, making results reproducible
across runs and directly comparable with an exhaustive-enumeration oracle
(identical left-to-right cost summation).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .topology import Topology

__all__ = ["RoutingSolution", "decode_action", "WEIGHT_FLOOR"]

WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class RoutingSolution:
    """Minimum-weight path for every ordered node pair (i, j), i != j."""

    paths: dict  # (src, dst) -> tuple of node indices, starting src, ending dst

    def path(self, src: int, dst: int) -> tuple:
        return self.paths[(src, dst)]


def decode_action(action: np.ndarray, topology: Topology) -> RoutingSolution:
    """Interpret one weight per full-duplex link and route every pair.

    Weights must lie strictly inside (0, 1); the same cost applies in both
    directions of a link.  Costs are floored at ``WEIGHT_FLOOR`` so that no
    zero-cost cycles can arise.
    """
    action = np.asarray(action, dtype=np.float64).reshape(-1)
    if action.shape[0] != topology.n_links:
        raise ValueError(
            f"action has {action.shape[0]} components, topology has "
            f"{topology.n_links} links"
        )
    if np.any(action <= 0.0) or np.any(action >= 1.0):
        raise ValueError("action components must lie strictly inside (0, 1)")
    costs = np.maximum(action, WEIGHT_FLOOR)

    n = topology.n_nodes
    adj: list = [[] for _ in range(n)]
    for k, link in enumerate(topology.links):
        w = float(costs[k])
        adj[link.a].append((link.b, w))
        adj[link.b].append((link.a, w))
    for lst in adj:
        lst.sort()

    paths: dict = {}
    for src in range(n):
        finalized = set()
        heap = [(0.0, (src,))]
        while heap and len(finalized) < n:
            dist, path = heapq.heappop(heap)
            u = path[-1]
            if u in finalized:
                continue
            finalized.add(u)
            if u != src:
                paths[(src, u)] = path
            for v, w in adj[u]:
                if v not in finalized and v not in path:
                    heapq.heappush(heap, (dist + w, path + (v,)))
    return RoutingSolution(paths)
