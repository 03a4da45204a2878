"""Deterministic-policy-gradient training for the routing actor/critic.

The actor maps a traffic window to per-link weights; the critic scores
(state, action) pairs.  Training follows the usual off-policy recipe: roll
the noisy policy, store transitions in the priority buffer, and on each step
fit the critic to one-step bootstrapped targets from the target networks
while the actor ascends the critic's action gradient.  Target copies trail
the online networks through soft updates.

Sign convention: the environment reports raw positive delays (ms); the agent
stores internal rewards = -delay * reward_scale, so maximizing return
minimizes delay.  All metrics surfaced to callers stay in raw positive ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import AdamState, Tape, Tensor, adam_step, reduce_mean, reduce_sum
from .env.netenv import RoutingEnv
from .metrics import MetricsRow, summarize_delays, write_metrics_csv
from .nn import Backbone, build_actor, build_critic
from .replay import PerBuffer, Transition

__all__ = [
    "ActorCriticPair",
    "AgentConfig",
    "EvaluationResult",
    "StepReport",
    "act",
    "build_pair",
    "critic_target",
    "evaluate",
    "soft_update",
    "train",
    "train_step",
]

ACTION_MARGIN = 1e-6  # keep actions strictly inside (0, 1) for the router


@dataclass
class AgentConfig:
    gamma: float = 0.99
    tau: float = 0.001
    actor_lr: float = 0.001      # verbatim from the reference setup; the
    critic_lr: float = 0.0001    # actor/critic rates are deliberately uneven
    batch: int = 32
    buffer_capacity: int = 2000
    episode_steps: int = 1000
    epochs: int = 60
    window: int = 4
    noise_scale: float = 0.2
    noise_final: float = 0.01
    ou_noise: bool = False
    backbone: str = "cnn-lstm-tam"
    per_alpha: float = 0.6
    per_beta: float = 0.6
    per_epsilon: float = 0.01
    grad_clip: Optional[float] = 10.0
    # Delays of hundreds of ms (or the ~1000 ms overload penalty) map to
    # rewards of order one, which the critic can reach at its small
    # learning rate; the policy ordering is unaffected by the scale.
    reward_scale: float = 0.001
    state_scale: float = 0.0     # 0 -> auto: 1 / mean link capacity
    seed: int = 0

    def validate(self) -> "AgentConfig":
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch < 1 or self.buffer_capacity < self.batch:
            raise ValueError("need buffer capacity >= batch >= 1")
        if self.episode_steps < 1 or self.window < 1:
            raise ValueError("episode_steps and window must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        return self


@dataclass
class ActorCriticPair:
    actor: Backbone
    critic: Backbone
    target_actor: Backbone
    target_critic: Backbone
    actor_opt: AdamState
    critic_opt: AdamState
    state_scale: float = 1.0


@dataclass
class StepReport:
    critic_loss: float
    actor_objective: float
    td_errors: np.ndarray
    q_grad_norms: np.ndarray
    refs: list


@dataclass
class EvaluationResult:
    per_sequence: list
    summary: dict


def build_pair(config: AgentConfig, state_shape: tuple, action_dim: int,
               state_scale: float = 1.0) -> ActorCriticPair:
    """Construct online networks, exact target copies, and Adam states."""
    seq = np.random.SeedSequence([config.seed, 0])
    init_rng = np.random.default_rng(seq)
    kw = dict(state_shape=state_shape, action_dim=action_dim, window=config.window)
    actor = build_actor(config.backbone, rng=init_rng, **kw)
    critic = build_critic(config.backbone, rng=init_rng, **kw)
    target_actor = build_actor(config.backbone, rng=np.random.default_rng(0), **kw)
    target_critic = build_critic(config.backbone, rng=np.random.default_rng(0), **kw)
    _copy_arrays(target_actor, actor)
    _copy_arrays(target_critic, critic)
    actor_opt = AdamState([t for _, t in actor.params()], lr=config.actor_lr)
    critic_opt = AdamState([t for _, t in critic.params()], lr=config.critic_lr)
    return ActorCriticPair(actor, critic, target_actor, target_critic,
                           actor_opt, critic_opt, state_scale)


def _aligned_arrays(target: Backbone, online: Backbone):
    t_arrays = target.named_arrays()
    o_arrays = online.named_arrays()
    if [(n, a.shape) for n, a in t_arrays] != [(n, a.shape) for n, a in o_arrays]:
        raise ValueError("target and online networks have different architectures")
    return t_arrays, o_arrays


def _copy_arrays(target: Backbone, online: Backbone) -> None:
    for (_, dst), (_, src) in zip(*_aligned_arrays(target, online)):
        np.copyto(dst, src)


def soft_update(target: Backbone, online: Backbone, tau: float) -> None:
    """Blend every parameter and buffer: target <- tau*online + (1-tau)*target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for (_, dst), (_, src) in zip(*_aligned_arrays(target, online)):
        dst *= 1.0 - tau
        dst += tau * src


def act(pair: ActorCriticPair, window: np.ndarray, noise_scale: float = 0.0,
        rng: Optional[np.random.Generator] = None,
        noise_vector: Optional[np.ndarray] = None) -> np.ndarray:
    """Deterministic policy output with optional exploration noise.

    The window is one unbatched state (W, H, Wd); output components are
    clamped strictly inside (0, 1) so the router always accepts them.  With
    ``noise_scale`` 0 and no noise vector, no randomness is consumed.
    """
    window = np.asarray(window, dtype=np.float64)
    batched = window[None, ...] * pair.state_scale
    out = pair.actor.forward(batched, train=False).data[0]
    if noise_vector is not None:
        out = out + noise_vector
    elif noise_scale > 0.0:
        if rng is None:
            raise ValueError("exploration noise needs a random generator")
        out = out + rng.normal(0.0, noise_scale, size=out.shape)
    return np.clip(out, ACTION_MARGIN, 1.0 - ACTION_MARGIN)


def critic_target(pair: ActorCriticPair, batch: Sequence[Transition],
                  gamma: float) -> np.ndarray:
    """One-step bootstrapped values y = r + gamma * Q'(S', mu'(S')).

    Terminal transitions use y = r.  Both target networks run in eval mode.
    """
    next_states = np.stack([t.next_state for t in batch]) * pair.state_scale
    rewards = np.array([t.reward for t in batch])
    not_done = np.array([0.0 if t.done else 1.0 for t in batch])
    next_actions = pair.target_actor.forward(next_states, train=False)
    next_q = pair.target_critic.forward(next_states, next_actions,
                                        train=False).data.reshape(-1)
    return rewards + gamma * not_done * next_q


def _clip_gradients(grads: dict, params: Sequence[Tensor],
                    max_norm: Optional[float]) -> dict:
    if max_norm is None:
        return grads
    total = math.sqrt(sum(float(np.sum(grads[p] * grads[p])) for p in params))
    if total <= max_norm or total == 0.0:
        return grads
    factor = max_norm / total
    return {p: grads[p] * factor for p in params}


def train_step(pair: ActorCriticPair, buffer: PerBuffer, config: AgentConfig,
               rng: Optional[np.random.Generator] = None,
               dropout_rng: Optional[np.random.Generator] = None) -> StepReport:
    """One optimization step over a prioritized minibatch.

    Fits the critic to bootstrapped targets, pushes the actor up the
    critic's action gradient, reports per-sample |TD| and action-gradient
    norms for priority updates, then soft-updates both target networks.
    """
    if len(buffer) < config.batch:
        raise ValueError(
            f"buffer holds {len(buffer)} transitions, need {config.batch}"
        )
    if rng is None:
        rng = np.random.default_rng()
    transitions, refs = buffer.sample(config.batch, rng=rng)
    states = np.stack([t.state for t in transitions]) * pair.state_scale
    actions = np.stack([t.action for t in transitions])
    targets = critic_target(pair, transitions, config.gamma)

    critic_params = [t for _, t in pair.critic.params()]
    actor_params = [t for _, t in pair.actor.params()]

    # --- critic regression toward the bootstrapped targets
    with Tape() as tape:
        q = pair.critic.forward(states, actions, train=True, rng=dropout_rng)
        diff = q - Tensor(targets.reshape(-1, 1))
        loss = reduce_mean(diff * diff)
        grads = tape.backward(loss)
    td_errors = (q.data.reshape(-1) - targets).copy()
    adam_step(critic_params, _clip_gradients(grads, critic_params, config.grad_clip),
              pair.critic_opt)
    critic_loss = loss.item()

    # --- per-sample gradient of Q at the stored actions (priority signal).
    # Measured in eval mode: the priority should not wobble with dropout
    # masks, and a measurement pass must not touch batch-norm running stats.
    action_leaf = Tensor(actions, requires_grad=True)
    with Tape() as tape:
        q_at = pair.critic.forward(states, action_leaf, train=False)
        grads = tape.backward(reduce_sum(q_at))
    q_grad_norms = np.sqrt((grads[action_leaf] ** 2).sum(axis=1))

    # --- actor ascends the critic's value estimate.  The critic acts as a
    # fixed objective landscape here, so it runs in eval mode: its dropout
    # noise would only blur the ascent direction, and its running stats
    # should move once per step (in the regression pass above), not twice.
    with Tape() as tape:
        proposed = pair.actor.forward(states, train=True, rng=dropout_rng)
        value = reduce_mean(pair.critic.forward(states, proposed, train=False))
        grads = tape.backward(value)
    ascent = {p: -grads[p] for p in actor_params}
    adam_step(actor_params, _clip_gradients(ascent, actor_params, config.grad_clip),
              pair.actor_opt)
    actor_objective = value.item()

    pair.actor.zero_grad()
    pair.critic.zero_grad()

    soft_update(pair.target_actor, pair.actor, config.tau)
    soft_update(pair.target_critic, pair.critic, config.tau)
    return StepReport(critic_loss, actor_objective, td_errors, q_grad_norms, refs)


class _OuProcess:
    """Ornstein-Uhlenbeck noise, reset to zero at each episode start."""

    def __init__(self, dim: int, theta: float = 0.15):
        self.dim = dim
        self.theta = theta
        self.state = np.zeros(dim)

    def reset(self) -> None:
        self.state = np.zeros(self.dim)

    def sample(self, sigma: float, rng: np.random.Generator) -> np.ndarray:
        self.state = (self.state - self.theta * self.state
                      + sigma * rng.normal(size=self.dim))
        return self.state


def train(env: RoutingEnv, config: AgentConfig,
          metrics_path: Optional[str] = None,
          pair: Optional[ActorCriticPair] = None,
          max_train_steps: Optional[int] = None,
          episode_pool: Optional[int] = None,
          epoch_callback: Optional[Callable[[int, "ActorCriticPair"], None]] = None):
    """Run the full training loop; returns (pair, per-epoch metric rows).

    Each epoch is one environment episode of ``config.episode_steps`` steps.
    The loop is deterministic given (config.seed, env seed): separate
    generator streams drive exploration noise, dropout masks, and replay
    sampling.  Exploration noise decays over the configured horizon
    (epochs x episode_steps); ``max_train_steps`` interrupts the run after
    that many gradient updates without rescaling the decay, so a short
    budget trains under early-phase noise rather than a compressed schedule.

    ``episode_pool`` caps the number of distinct traffic sequences: epoch e
    replays sequence e mod pool.  ``epoch_callback(epoch, pair)`` runs after
    each epoch's metrics row is recorded, e.g. to snapshot checkpoints.
    """
    config.validate()
    if pair is None:
        scale = config.state_scale
        if scale == 0.0:
            caps = [l.capacity_mbps for l in env.topology.links]
            scale = 1.0 / (sum(caps) / len(caps))
        pair = build_pair(config, env.state_shape, env.action_dim, scale)
    buffer = PerBuffer(config.buffer_capacity, alpha=config.per_alpha,
                       beta=config.per_beta, epsilon=config.per_epsilon)

    streams = np.random.SeedSequence([config.seed, 1]).spawn(3)
    noise_rng = np.random.default_rng(streams[0])
    dropout_rng = np.random.default_rng(streams[1])
    sample_rng = np.random.default_rng(streams[2])

    total_steps = config.epochs * config.episode_steps
    sigma = config.noise_scale
    decay = 1.0
    if total_steps > 0 and config.noise_scale > 0 and config.noise_final > 0:
        decay = (config.noise_final / config.noise_scale) ** (1.0 / total_steps)
    ou = _OuProcess(env.action_dim) if config.ou_noise else None

    rows = []
    updates = 0
    exhausted = False
    for epoch in range(config.epochs):
        episode = epoch if episode_pool is None else epoch % episode_pool
        window = env.reset(episode=episode)
        if ou is not None:
            ou.reset()
        delays = []
        losses = []
        objectives = []
        done = False
        while not done and not exhausted:
            if ou is not None:
                action = act(pair, window, rng=noise_rng,
                             noise_vector=ou.sample(sigma, noise_rng))
            else:
                action = act(pair, window, sigma, noise_rng)
            next_window, delay_ms, done = env.step(action)
            delays.append(delay_ms)
            buffer.push(Transition(window, action, -delay_ms * config.reward_scale,
                                   next_window, done))
            if len(buffer) >= config.batch:
                report = train_step(pair, buffer, config, sample_rng, dropout_rng)
                buffer.update_priorities(report.refs, report.td_errors,
                                         report.q_grad_norms)
                losses.append(report.critic_loss)
                objectives.append(report.actor_objective)
                updates += 1
                exhausted = (max_train_steps is not None
                             and updates >= max_train_steps)
            window = next_window
            sigma *= decay
        if not delays:
            break
        stats = summarize_delays(delays)
        rows.append(MetricsRow(
            epoch=epoch,
            mean_delay_ms=float(np.mean(delays)),
            min=stats["min"], max=stats["max"], q1=stats["q1"],
            median=stats["median"], q3=stats["q3"],
            critic_loss=float(np.mean(losses)) if losses else math.nan,
            actor_objective=float(np.mean(objectives)) if objectives else math.nan,
            noise_scale=sigma,
        ))
        if metrics_path is not None:
            write_metrics_csv(metrics_path, rows[-1:], append=True)
        if epoch_callback is not None:
            epoch_callback(epoch, pair)
    return pair, rows


def evaluate(pair: Optional[ActorCriticPair], env: RoutingEnv,
             sequences: int = 100, episode_offset: int = 1_000_000,
             policy: Optional[Callable[[np.ndarray], np.ndarray]] = None
             ) -> EvaluationResult:
    """Noise-free rollouts over held-out traffic sequences.

    Episode seeds start at ``episode_offset`` so evaluation traffic never
    collides with training episodes.  ``policy`` overrides the actor with an
    arbitrary window -> action callable (e.g. a fixed-weights baseline).
    """
    if pair is None and policy is None:
        raise ValueError("need a trained pair or an explicit policy")
    per_sequence = []
    for k in range(sequences):
        window = env.reset(episode=episode_offset + k)
        delays = []
        done = False
        while not done:
            if policy is not None:
                action = policy(window)
            else:
                action = act(pair, window, 0.0)
            window, delay_ms, done = env.step(action)
            delays.append(delay_ms)
        per_sequence.append(float(np.mean(delays)))
    return EvaluationResult(per_sequence, summarize_delays(per_sequence))
