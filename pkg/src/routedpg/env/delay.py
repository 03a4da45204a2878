"""Analytic per-pair delay evaluation.

Each directed link is modeled as an M/M/1 queue with service capacity equal
to the link rate: the mean sojourn time at load lambda is 1/(C - lambda)
seconds, reported in ms.  An overloaded link (lambda >= C) contributes a
fixed finite penalty instead, ten times the delay the link would have at 99%
spare-capacity exhaustion, so rewards stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .routing import RoutingSolution
from .topology import Topology

__all__ = ["DelayReport", "compute_delay", "link_delay_ms", "mean_delay"]

OVERLOAD_FACTOR = 10.0
OVERLOAD_RESIDUAL = 0.01


def link_delay_ms(capacity_mbps: float, load_mbps: float, prop_delay_ms: float) -> float:
    """Delay contribution of one directed link at the given load."""
    if load_mbps < capacity_mbps:
        return prop_delay_ms + 1000.0 / (capacity_mbps - load_mbps)
    return OVERLOAD_FACTOR * (
        prop_delay_ms + 1000.0 / (OVERLOAD_RESIDUAL * capacity_mbps)
    )


@dataclass(frozen=True)
class DelayReport:
    """Per-pair end-to-end delays (ms) plus the per-directed-link loads."""

    delays: np.ndarray        # (N, N), zero diagonal
    link_loads: np.ndarray    # (L, 2): loads for (a->b, b->a) per link

    @property
    def n_nodes(self) -> int:
        return self.delays.shape[0]


def compute_delay(routing: RoutingSolution, tm: np.ndarray,
                  topology: Topology) -> DelayReport:
    """Route every demand, accumulate directed link loads, sum path delays."""
    tm = np.asarray(tm, dtype=np.float64)
    n = topology.n_nodes
    if tm.shape != (n, n):
        raise ValueError(f"demand matrix shape {tm.shape} != ({n}, {n})")

    directed = {}
    for k, link in enumerate(topology.links):
        directed[(link.a, link.b)] = (k, 0)
        directed[(link.b, link.a)] = (k, 1)

    loads = np.zeros((topology.n_links, 2))
    for i in range(n):
        for j in range(n):
            if i == j or tm[i, j] == 0.0:
                continue
            if (i, j) not in routing.paths:
                raise ValueError(f"no path for demanded pair ({i}, {j})")
            path = routing.paths[(i, j)]
            for u, v in zip(path[:-1], path[1:]):
                k, direction = directed[(u, v)]
                loads[k, direction] += tm[i, j]

    per_edge_delay = {}
    for (u, v), (k, direction) in directed.items():
        link = topology.links[k]
        per_edge_delay[(u, v)] = link_delay_ms(link.capacity_mbps,
                                               loads[k, direction],
                                               link.prop_delay_ms)

    delays = np.zeros((n, n))
    for (i, j), path in routing.paths.items():
        delays[i, j] = sum(per_edge_delay[(u, v)]
                           for u, v in zip(path[:-1], path[1:]))
    return DelayReport(delays, loads)


def mean_delay(report: DelayReport) -> float:
    """Average of all N^2 matrix entries, zero diagonal included."""
    n = report.n_nodes
    return float(report.delays.sum() / (n * n))
