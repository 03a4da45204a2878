"""Circular experience buffer with hybrid priorities.

Priority of a stored transition mixes the magnitude of its last temporal-
difference error with the norm of the critic's action gradient:

    v = alpha * (|td| + epsilon) + (1 - alpha) * grad_norm

and replay probabilities follow a power law, p_k = v_k**beta / sum(v**beta).
Priorities live in a flat array scanned directly (capacity is small enough
that a tree index would buy nothing); sampling uses the generator's weighted
``choice`` so results are reproducible from the seed alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

__all__ = ["PerBuffer", "SampleRef", "Transition", "priority", "power_law_probabilities"]


def priority(td_error: float, q_grad_norm: float, alpha: float, epsilon: float) -> float:
    """Hybrid priority of one transition."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if q_grad_norm < 0.0:
        raise ValueError(f"gradient norm must be nonnegative, got {q_grad_norm}")
    return alpha * (abs(td_error) + epsilon) + (1.0 - alpha) * q_grad_norm


def power_law_probabilities(priorities: np.ndarray, beta: float) -> np.ndarray:
    v = np.asarray(priorities, dtype=np.float64) ** beta
    return v / v.sum()


@dataclass(frozen=True)
class Transition:
    """One (state window, action, reward, next window) sample."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool = False


class SampleRef(NamedTuple):
    """Stable handle to a sampled slot; ``stamp`` detects eviction."""

    slot: int
    stamp: int


class PerBuffer:
    """Fixed-capacity ring of transitions with weighted sampling."""

    def __init__(self, capacity: int = 2000, alpha: float = 0.6,
                 beta: float = 0.6, epsilon: float = 0.01):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.epsilon = epsilon
        self._data: list = [None] * capacity
        self._priorities = np.zeros(capacity)
        self._stamps = np.full(capacity, -1, dtype=np.int64)
        self._cursor = 0
        self._size = 0
        self._counter = 0

    def __len__(self) -> int:
        return self._size

    def push(self, transition: Transition) -> None:
        """Insert at the write cursor, evicting the oldest entry when full.

        Fresh transitions get the current maximum stored priority (a floor
        constant when the buffer is empty) so they are sampled soon after
        arrival.
        """
        if self._size:
            p = float(self._priorities[:self._size].max())
        else:
            p = self.alpha * self.epsilon + 1.0
        slot = self._cursor
        self._data[slot] = transition
        self._priorities[slot] = p
        self._stamps[slot] = self._counter
        self._counter += 1
        self._cursor = (slot + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def priorities(self) -> np.ndarray:
        """Current priorities by slot (copy)."""
        return self._priorities[:self._size].copy()

    def replay_probabilities(self, beta: Optional[float] = None) -> np.ndarray:
        if self._size == 0:
            raise ValueError("replay probabilities of an empty buffer")
        b = self.beta if beta is None else beta
        return power_law_probabilities(self._priorities[:self._size], b)

    def sample(self, batch: int = 32, beta: Optional[float] = None,
               rng: Optional[np.random.Generator] = None):
        """Draw ``batch`` transitions with replacement.

        Returns (transitions, refs); pass the refs back to
        :meth:`update_priorities` once new errors are known.
        """
        if batch < 1:
            raise ValueError(f"batch must be >= 1, got {batch}")
        if self._size < batch:
            raise ValueError(
                f"buffer holds {self._size} transitions, need at least {batch}"
            )
        if rng is None:
            rng = np.random.default_rng()
        probs = self.replay_probabilities(beta)
        slots = rng.choice(self._size, size=batch, replace=True, p=probs)
        refs = [SampleRef(int(s), int(self._stamps[s])) for s in slots]
        return [self._data[s] for s in slots], refs

    def update_priorities(self, refs: Sequence[SampleRef],
                          td_errors: Sequence[float],
                          q_grad_norms: Sequence[float]) -> None:
        """Recompute priorities for still-resident entries; skip evicted ones."""
        if not (len(refs) == len(td_errors) == len(q_grad_norms)):
            raise ValueError("refs, td_errors and q_grad_norms must align")
        for ref, td, g in zip(refs, td_errors, q_grad_norms):
            if not 0 <= ref.slot < self._size:
                raise IndexError(f"slot {ref.slot} out of range for size {self._size}")
            if self._stamps[ref.slot] != ref.stamp:
                continue  # evicted since sampling
            self._priorities[ref.slot] = priority(td, g, self.alpha, self.epsilon)

    def entries(self):
        """(transition, priority) pairs in slot order — diagnostics only."""
        return [(self._data[i], float(self._priorities[i])) for i in range(self._size)]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["index", "priority", "reward"])
            for i in range(self._size):
                writer.writerow([i, repr(float(self._priorities[i])),
                                 repr(float(self._data[i].reward))])
