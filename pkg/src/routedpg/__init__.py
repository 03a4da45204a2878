"""routedpg: an actor-critic agent that learns per-link routing weights.

The agent observes recent traffic matrices on a simulated network, outputs a
weight per directed link, and is trained to minimize the mean end-to-end
packet delay that shortest-path routing under those weights produces.
"""

__version__ = "0.1.0"
