"""The simulated routing environment.

An episode holds a traffic-matrix sequence; the observation is a sliding
window of the last W packed matrices, oldest first.  Each step decodes the
agent's per-link weights into shortest-path routing, evaluates the analytic
delay of the newest demand matrix under that routing, then advances one
matrix.  The step reward is reported as the raw positive mean delay in ms;
callers that want "higher is better" negate it.
"""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from .delay import compute_delay, mean_delay
from .routing import decode_action
from .topology import Topology
from .traffic import generate_traffic, pack_state

__all__ = ["RoutingEnv", "uniform_action"]


def uniform_action(topology: Topology) -> np.ndarray:
    """Equal weight on every link: minimum-hop routing baseline."""
    return np.full(topology.n_links, 0.5)


class RoutingEnv:
    """Single-threaded environment over one topology.

    Traffic is regenerated per episode from a seed sequence derived from
    (seed, episode), so ``reset(k)`` is reproducible in isolation.  A fixed
    traffic sequence of shape (episode_steps + window, N, N) can be supplied
    instead for held-out evaluation.
    """

    def __init__(self, topology: Topology, ilt: float = 0.4, window: int = 4,
                 episode_steps: int = 1000, seed: int = 0,
                 correlation: float = 0.0,
                 traffic: Optional[np.ndarray] = None):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.topology = topology
        self.ilt = ilt
        self.window = window
        self.seed = seed
        self.correlation = correlation
        self._fixed_traffic = None
        if traffic is not None:
            traffic = np.asarray(traffic, dtype=np.float64)
            n = topology.n_nodes
            if traffic.ndim != 3 or traffic.shape[1:] != (n, n):
                raise ValueError(
                    f"traffic must be (steps, {n}, {n}), got {traffic.shape}"
                )
            if traffic.shape[0] <= window:
                raise ValueError(
                    f"traffic needs more than window={window} matrices, "
                    f"got {traffic.shape[0]}"
                )
            self._fixed_traffic = traffic
            episode_steps = traffic.shape[0] - window
        if episode_steps < 1:
            raise ValueError(f"episode_steps must be >= 1, got {episode_steps}")
        self.episode_steps = episode_steps

        self._traffic: Optional[np.ndarray] = None
        self._frames: Optional[np.ndarray] = None
        self._cursor = 0
        self._started = False

    @property
    def action_dim(self) -> int:
        return self.topology.n_links

    @property
    def state_shape(self) -> tuple:
        n = self.topology.n_nodes
        return (n - 1, n)

    def reset(self, episode: int = 0) -> np.ndarray:
        """Load the episode's traffic and return the initial state window."""
        if self._fixed_traffic is not None:
            self._traffic = self._fixed_traffic
        else:
            seq = np.random.SeedSequence([self.seed, int(episode)])
            self._traffic = generate_traffic(
                self.topology, self.ilt, self.episode_steps + self.window,
                rng=np.random.default_rng(seq), correlation=self.correlation,
            )
        self._frames = np.stack([pack_state(tm) for tm in self._traffic])
        self._cursor = 0
        self._started = True
        return self._frames[0:self.window].copy()

    @property
    def done(self) -> bool:
        return self._started and self._cursor >= self.episode_steps

    def current_matrix(self) -> np.ndarray:
        """The demand matrix the next step will be scored against."""
        if not self._started:
            raise RuntimeError("environment not reset")
        return self._traffic[self._cursor + self.window - 1].copy()

    def step(self, action: np.ndarray):
        """Apply one routing action.

        Returns (next window (W, N-1, N), raw mean delay in ms, done).
        """
        if not self._started:
            raise RuntimeError("environment not reset")
        if self._cursor >= self.episode_steps:
            raise RuntimeError("episode is finished; call reset")
        routing = decode_action(action, self.topology)
        tm = self._traffic[self._cursor + self.window - 1]
        delay_ms = mean_delay(compute_delay(routing, tm, self.topology))
        self._cursor += 1
        nxt = self._frames[self._cursor:self._cursor + self.window].copy()
        return nxt, delay_ms, self._cursor >= self.episode_steps
