"""Latency statistics: nearest-rank percentiles and the FPS identity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from medrt.errors import ValidationError


@dataclass(frozen=True)
class LatencySummary:
    count: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    fps: float  # 1000 / mean_ms

    def to_json(self) -> dict:
        return {"count": self.count, "mean": self.mean_ms, "p50": self.p50_ms,
                "p95": self.p95_ms, "p99": self.p99_ms, "fps": self.fps}


def nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile; 1e-9 ceil guard against float noise."""
    n = sorted_vals.size
    rank = max(int(np.ceil(pct / 100.0 * n - 1e-9)), 1)
    return float(sorted_vals[rank - 1])


def latency_summary(samples_ms) -> LatencySummary:
    vals = np.asarray(list(samples_ms), dtype=np.float64)
    if vals.size == 0:
        raise ValidationError("latency summary needs at least one sample")
    if (vals < 0).any():
        raise ValidationError("negative latency sample")
    s = np.sort(vals)
    mean = float(vals.mean())
    return LatencySummary(
        count=int(vals.size), mean_ms=mean,
        p50_ms=nearest_rank(s, 50.0), p95_ms=nearest_rank(s, 95.0),
        p99_ms=nearest_rank(s, 99.0),
        fps=(1000.0 / mean) if mean > 0 else float("inf"))
