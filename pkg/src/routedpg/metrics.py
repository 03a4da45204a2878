"""Metric post-processing: reward normalization, delay summaries, CSV I/O."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence, Union

import numpy as np

__all__ = [
    "MetricsRow",
    "MetricsSeries",
    "normalize_rewards",
    "read_metrics_csv",
    "summarize_delays",
    "write_metrics_csv",
]


class MetricsSeries:
    """An ordered reward series with cached extremes."""

    def __init__(self, samples: Sequence[float]):
        self.samples = np.asarray(samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("metrics series must be a nonempty 1-D sequence")

    @property
    def r_min(self) -> float:
        return float(self.samples.min())

    @property
    def r_max(self) -> float:
        return float(self.samples.max())

    def __len__(self) -> int:
        return int(self.samples.size)


def normalize_rewards(series: Union[MetricsSeries, Sequence[float]]) -> np.ndarray:
    """Map a reward series onto [0, 1] by its own range.

    The minimum maps to 0 and the maximum to 1.  A constant series has no
    range; it maps to all zeros and a warning is emitted.
    """
    if not isinstance(series, MetricsSeries):
        series = MetricsSeries(series)
    span = series.r_max - series.r_min
    if span == 0.0:
        warnings.warn("reward series has zero range; normalized output is all zeros",
                      stacklevel=2)
        return np.zeros_like(series.samples)
    return (series.samples - series.r_min) / span


def summarize_delays(values: Sequence[float]) -> dict:
    """Order statistics (min, q1, median, q3, max) with linear interpolation."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty list")
    q1, median, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return {
        "min": float(arr.min()),
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "max": float(arr.max()),
    }


@dataclass(frozen=True)
class MetricsRow:
    """One training epoch's statistics, in raw positive delay terms."""

    epoch: int
    mean_delay_ms: float
    min: float
    max: float
    q1: float
    median: float
    q3: float
    critic_loss: float
    actor_objective: float
    noise_scale: float


METRICS_HEADER = [f.name for f in fields(MetricsRow)]


def write_metrics_csv(path: Union[str, Path], rows: Sequence[MetricsRow],
                      append: bool = False) -> None:
    """Write (or append) epoch rows; floats use ``repr`` for exact round-trip."""
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as f:
        writer = csv.writer(f)
        if fresh:
            writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow([row.epoch] + [repr(float(getattr(row, n)))
                                           for n in METRICS_HEADER[1:]])


def read_metrics_csv(path: Union[str, Path]) -> list:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise ValueError(f"unrecognized metrics header: {header}")
        rows = []
        for raw in reader:
            if not raw:
                continue
            rows.append(MetricsRow(int(raw[0]), *(float(v) for v in raw[1:])))
    return rows
