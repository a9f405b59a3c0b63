"""Pipeline statistics: per-stage service summaries, per-priority end-to-end
latencies, queue-depth series, and loss accounting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from medrt.jsonutil import canonical_json
from medrt.metrics.latency import LatencySummary, latency_summary

STAGES = ("ingest", "preprocess", "inference", "postprocess")


@dataclass
class JobRecord:
    job_id: str
    priority: str
    submit_ms: float
    stage_service_ms: dict = field(default_factory=dict)
    stage_wait_ms: dict = field(default_factory=dict)
    batch_size: int = 0
    early_exit: bool = False
    outcome: str = "pending"  # completed | shed | cancelled | failed
    done_ms: float = 0.0

    @property
    def end_to_end_ms(self) -> float:
        return self.done_ms - self.submit_ms


@dataclass
class PipelineStats:
    submitted: int
    completed: int
    shed: int
    cancelled: int
    failed: int
    early_exits: int
    stage_service: dict             # stage -> LatencySummary | None
    end_to_end: LatencySummary | None
    end_to_end_stat: LatencySummary | None
    end_to_end_routine: LatencySummary | None
    queue_depth_series: dict        # {"t_ms": [...], stage: [...]}
    blocked_pushes: int = 0
    circuit_open: bool = False
    saturated: bool = False

    @property
    def early_exit_rate(self) -> float:
        return self.early_exits / self.completed if self.completed else 0.0

    def to_json_bytes(self) -> bytes:
        def summ(s):
            return None if s is None else s.to_json()
        return canonical_json({
            "submitted": self.submitted, "completed": self.completed,
            "shed": self.shed, "cancelled": self.cancelled, "failed": self.failed,
            "early_exits": self.early_exits, "early_exit_rate": self.early_exit_rate,
            "blocked_pushes": self.blocked_pushes, "circuit_open": self.circuit_open,
            "saturated": self.saturated,
            "stage_service": {k: summ(v) for k, v in self.stage_service.items()},
            "end_to_end": summ(self.end_to_end),
            "end_to_end_stat": summ(self.end_to_end_stat),
            "end_to_end_routine": summ(self.end_to_end_routine),
            "queue_depth_series": self.queue_depth_series,
        })

    def depth_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["t_ms"] + list(STAGES))
        ts = self.queue_depth_series.get("t_ms", [])
        for i, t in enumerate(ts):
            writer.writerow([f"{t:.4f}"] + [self.queue_depth_series[s][i] for s in STAGES])
        return buf.getvalue()


def build_stats(records: list[JobRecord], depth_series: dict,
                blocked_pushes: int = 0, circuit_open: bool = False,
                saturated: bool = False) -> PipelineStats:
    completed = [r for r in records if r.outcome == "completed"]
    shed = sum(1 for r in records if r.outcome == "shed")
    cancelled = sum(1 for r in records if r.outcome == "cancelled")
    failed = sum(1 for r in records if r.outcome == "failed")

    def summary(vals):
        vals = list(vals)
        return latency_summary(vals) if vals else None

    stage_service = {}
    for stage in STAGES:
        stage_service[stage] = summary(
            r.stage_service_ms[stage] for r in completed if stage in r.stage_service_ms)
    stat_jobs = [r for r in completed if r.priority == "stat"]
    routine_jobs = [r for r in completed if r.priority == "routine"]
    return PipelineStats(
        submitted=len(records), completed=len(completed), shed=shed,
        cancelled=cancelled, failed=failed,
        early_exits=sum(1 for r in completed if r.early_exit),
        stage_service=stage_service,
        end_to_end=summary(r.end_to_end_ms for r in completed),
        end_to_end_stat=summary(r.end_to_end_ms for r in stat_jobs),
        end_to_end_routine=summary(r.end_to_end_ms for r in routine_jobs),
        queue_depth_series=depth_series, blocked_pushes=blocked_pushes,
        circuit_open=circuit_open, saturated=saturated)
