"""Network topology loading and validation.

A topology document is JSON with ``nodes`` (names) and ``links``; every link
is full-duplex with a capacity in Mbit/s and a propagation delay in ms::

    {"name": "...",
     "nodes": ["A", "B"],
     "links": [{"a": "A", "b": "B", "capacity_mbps": 10000.0,
                "prop_delay_ms": 1.5}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

__all__ = ["Link", "Topology", "load_topology", "bundled_topology_path"]


@dataclass(frozen=True)
class Link:
    """One full-duplex link between node indices ``a`` and ``b``."""

    a: int
    b: int
    capacity_mbps: float
    prop_delay_ms: float


@dataclass(frozen=True)
class Topology:
    name: str
    nodes: tuple
    links: tuple

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def total_capacity_mbps(self) -> float:
        """Sum over both directions of every full-duplex link."""
        return 2.0 * sum(l.capacity_mbps for l in self.links)

    def neighbors(self) -> dict:
        """node -> sorted list of (neighbor, link index)."""
        adj: dict = {i: [] for i in range(self.n_nodes)}
        for k, l in enumerate(self.links):
            adj[l.a].append((l.b, k))
            adj[l.b].append((l.a, k))
        for lst in adj.values():
            lst.sort()
        return adj


def _validate(name: str, nodes: list, links: list) -> Topology:
    if len(nodes) != len(set(nodes)):
        raise ValueError(f"topology {name!r}: duplicate node names")
    if len(nodes) < 2:
        raise ValueError(f"topology {name!r}: needs at least 2 nodes")
    index = {n: i for i, n in enumerate(nodes)}

    seen = set()
    out = []
    for entry in links:
        try:
            a, b = index[entry["a"]], index[entry["b"]]
        except KeyError as exc:
            raise ValueError(f"topology {name!r}: link endpoint {exc} is not a node") from None
        cap = float(entry["capacity_mbps"])
        delay = float(entry["prop_delay_ms"])
        if a == b:
            raise ValueError(f"topology {name!r}: self-loop at node {nodes[a]!r}")
        if cap <= 0:
            raise ValueError(f"topology {name!r}: nonpositive capacity on "
                             f"{nodes[a]!r}-{nodes[b]!r}")
        if delay <= 0:
            raise ValueError(f"topology {name!r}: nonpositive propagation delay on "
                             f"{nodes[a]!r}-{nodes[b]!r}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ValueError(f"topology {name!r}: duplicate link "
                             f"{nodes[a]!r}-{nodes[b]!r}")
        seen.add(key)
        out.append(Link(a, b, cap, delay))

    topo = Topology(name, tuple(nodes), tuple(out))

    # connectivity: breadth-first sweep from node 0
    adj = topo.neighbors()
    reached = {0}
    frontier = [0]
    while frontier:
        u = frontier.pop()
        for v, _ in adj[u]:
            if v not in reached:
                reached.add(v)
                frontier.append(v)
    if len(reached) != topo.n_nodes:
        missing = sorted(set(range(topo.n_nodes)) - reached)
        raise ValueError(f"topology {name!r}: disconnected; unreachable node "
                         f"indices {missing}")
    return topo


def load_topology(source: Union[str, Path, dict]) -> Topology:
    """Load and validate a topology from a JSON file path or a parsed dict."""
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    if "nodes" not in doc or "links" not in doc:
        raise ValueError("topology document needs 'nodes' and 'links'")
    return _validate(doc.get("name", "unnamed"), list(doc["nodes"]), list(doc["links"]))


def bundled_topology_path(name: str) -> Path:
    """Path of a topology document shipped with the package (e.g. 'geant2')."""
    base = resources.files("routedpg.env") / "data" / f"{name}.json"
    with resources.as_file(base) as p:
        if not p.exists():
            raise FileNotFoundError(f"no bundled topology named {name!r}")
        return p
