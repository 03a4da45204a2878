"""Experiment orchestration: sweep traffic intensities, train, summarize.

One `run_experiment` call reproduces the full measurement protocol: for each
traffic intensity level it trains an agent, snapshots checkpoints at the
requested epoch marks, evaluates each snapshot on held-out sequences, and
writes plot-ready CSV tables plus a manifest that pins every input needed to
reproduce the run bit for bit.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .agent import ActorCriticPair, AgentConfig, evaluate, train
from .env import RoutingEnv, bundled_topology_path, load_topology
from .kernels import BACKEND
from .metrics import read_metrics_csv

__all__ = [
    "ExperimentConfig",
    "run_experiment",
]

DELAY_SUMMARY_HEADER = ["ilt", "epochs", "min", "q1", "median", "q3", "max"]
NORMALIZED_HEADER = ["ilt", "epoch", "normalized_epoch_mean_reward",
                     "mean_normalized_step_reward"]


@dataclass
class ExperimentConfig:
    """Settings for a full multi-intensity run."""

    topology_path: Optional[str] = None          # None -> bundled geant2
    ilts: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0)
    epochs_list: Sequence[int] = (10, 20, 30, 40, 50, 60)
    train_sequences: int = 100
    eval_sequences: int = 100
    agent: AgentConfig = field(default_factory=AgentConfig)
    out_dir: str = "runs"
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        if not self.ilts:
            raise ValueError("need at least one traffic intensity level")
        for ilt in self.ilts:
            if not 0.0 < ilt <= 1.0:
                raise ValueError(f"ilt must lie in (0, 1], got {ilt}")
        if not self.epochs_list:
            raise ValueError("need at least one epoch mark")
        for e in self.epochs_list:
            if e < 1:
                raise ValueError(f"epoch marks must be positive, got {e}")
        if list(self.epochs_list) != sorted(self.epochs_list):
            raise ValueError("epoch marks must be ascending")
        if self.train_sequences < 1 or self.eval_sequences < 1:
            raise ValueError("sequence counts must be positive")
        self.agent.validate()
        return self


def _ilt_tag(ilt: float) -> str:
    return f"{int(round(ilt * 100)):03d}"


def _repr_row(values) -> list:
    return [v if isinstance(v, (str, int)) else repr(float(v)) for v in values]


def _normalized_columns(rows, reward_scale: float):
    """Eq.-7 style normalization of the per-epoch reward series.

    Returns two columns: the epoch-mean rewards normalized by their own
    range, and per-step normalization (constants from the per-step extremes
    across the whole run) averaged within each epoch.  Degenerate ranges
    normalize to zero.
    """
    epoch_means = np.array([-row.mean_delay_ms * reward_scale for row in rows])
    step_min = min(-row.max * reward_scale for row in rows)
    step_max = max(-row.min * reward_scale for row in rows)
    span = epoch_means.max() - epoch_means.min()
    col_epoch = (epoch_means - epoch_means.min()) / span if span > 0 \
        else np.zeros_like(epoch_means)
    step_span = step_max - step_min
    col_step = (epoch_means - step_min) / step_span if step_span > 0 \
        else np.zeros_like(epoch_means)
    return col_epoch, col_step


def run_experiment(config: ExperimentConfig) -> Path:
    """Execute the configured sweep; returns the artifact directory.

    Artifacts: metrics_ilt<tag>.csv per intensity, checkpoints at each epoch
    mark, normalized_rewards.csv, delay_summary.csv, and manifest.json.
    All failure-prone setup (topology parse, output dir, config validation)
    happens before any training starts.
    """
    config.validate()
    topo_path = config.topology_path or str(bundled_topology_path("geant2"))
    topology = load_topology(topo_path)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()

    manifest = {
        "version": __version__,
        "kernel_backend": BACKEND,
        "numpy": np.version.version,
        "python": sys.version.split()[0],
        "topology": topo_path,
        "topology_name": topology.name,
        "seed": config.seed,
        "ilts": list(config.ilts),
        "epochs_list": list(config.epochs_list),
        "train_sequences": config.train_sequences,
        "eval_sequences": config.eval_sequences,
        "agent": asdict(config.agent),
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    agent_cfg = AgentConfig(**asdict(config.agent))
    agent_cfg.epochs = max(config.epochs_list)
    agent_cfg.seed = config.seed

    summary_rows = []
    normalized_rows = []
    marks = set(config.epochs_list)
    for ilt in config.ilts:
        tag = _ilt_tag(ilt)
        env = RoutingEnv(topology, ilt=ilt, window=agent_cfg.window,
                         episode_steps=agent_cfg.episode_steps,
                         seed=config.seed)
        metrics_path = out / f"metrics_ilt{tag}.csv"
        if metrics_path.exists():
            metrics_path.unlink()

        checkpoint_stats = []

        def snapshot(epoch: int, pair: ActorCriticPair, _env=env, _tag=tag,
                     _stats=checkpoint_stats) -> None:
            done = epoch + 1
            if done not in marks:
                return
            pair.actor.save(str(out / f"actor_ilt{_tag}_ep{done}.ckpt"))
            pair.critic.save(str(out / f"critic_ilt{_tag}_ep{done}.ckpt"))
            result = evaluate(pair, _env, sequences=config.eval_sequences)
            _stats.append((done, result.summary))

        pair, rows = train(env, agent_cfg, metrics_path=str(metrics_path),
                           episode_pool=config.train_sequences,
                           epoch_callback=snapshot)
        for done, stats in checkpoint_stats:
            summary_rows.append([ilt, done, stats["min"], stats["q1"],
                                 stats["median"], stats["q3"], stats["max"]])
        col_epoch, col_step = _normalized_columns(rows, agent_cfg.reward_scale)
        for row, ce, cs in zip(rows, col_epoch, col_step):
            normalized_rows.append([ilt, row.epoch, ce, cs])

    with open(out / "delay_summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DELAY_SUMMARY_HEADER)
        for row in summary_rows:
            writer.writerow(_repr_row(row))
    with open(out / "normalized_rewards.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(NORMALIZED_HEADER)
        for row in normalized_rows:
            writer.writerow(_repr_row(row))
    return out


def read_delay_summary(path: Union[str, Path]) -> list:
    """Parse a delay_summary.csv back into rows of floats."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != DELAY_SUMMARY_HEADER:
            raise ValueError(f"unrecognized delay summary header: {header}")
        return [[float(v) for v in row] for row in reader if row]
