from .delay import DelayReport, compute_delay, link_delay_ms, mean_delay
from .netenv import RoutingEnv, uniform_action
from .routing import WEIGHT_FLOOR, RoutingSolution, decode_action
from .topology import Link, Topology, bundled_topology_path, load_topology
from .traffic import (
    generate_traffic,
    load_traffic_csv,
    pack_state,
    save_traffic_csv,
    unpack_state,
)

__all__ = [
    "DelayReport",
    "Link",
    "RoutingEnv",
    "RoutingSolution",
    "Topology",
    "WEIGHT_FLOOR",
    "bundled_topology_path",
    "compute_delay",
    "decode_action",
    "generate_traffic",
    "link_delay_ms",
    "load_topology",
    "load_traffic_csv",
    "mean_delay",
    "pack_state",
    "save_traffic_csv",
    "uniform_action",
]
