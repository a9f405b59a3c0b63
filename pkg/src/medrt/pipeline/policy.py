"""Pure scheduling policy: priority + aging, micro-batch formation, early exit.

These functions hold the whole scheduling contract; both the discrete-event
simulator and the threaded runtime call them, so their semantics stay
identical across the two execution modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from medrt.errors import ValidationError

STAT = "stat"
ROUTINE = "routine"
DEFAULT_LATENCY_BUDGET_MS = 80.0


@dataclass
class StudyJob:
    job_id: str
    priority: str = ROUTINE
    enqueue_time: float = 0.0            # ms, set at submission
    payload: object = None               # DICOM bytes in the runtime; None in sims
    latency_budget_ms: float = DEFAULT_LATENCY_BUDGET_MS
    metadata: dict = field(default_factory=dict)
    seq: int = 0                         # submission tiebreaker
    batcher_arrival: float = 0.0         # ms, set when the job reaches the batcher

    def __post_init__(self):
        if self.priority not in (STAT, ROUTINE):
            raise ValidationError(f"unknown priority {self.priority!r}")
        if self.latency_budget_ms <= 0:
            raise ValidationError("latency budget must be positive")


@dataclass(frozen=True)
class BatcherConfig:
    max_batch: int = 4
    window_ms: float = 5.0

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValidationError("max_batch must be >= 1")
        if self.window_ms < 0:
            raise ValidationError("window must be >= 0")


def effective_stat(job: StudyJob, now: float, aging_threshold_ms: float) -> bool:
    """stat jobs, plus routine jobs promoted after waiting >= the threshold."""
    if job.priority == STAT:
        return True
    return (now - job.enqueue_time) >= aging_threshold_ms


def scheduler_key(job: StudyJob, now: float, aging_threshold_ms: float):
    """Sort key: effective-stat class first, then FIFO by submission."""
    return (not effective_stat(job, now, aging_threshold_ms),
            job.enqueue_time, job.seq)


def schedule_next(stat_queue, routine_queue, aging_threshold_ms: float,
                  now: float) -> StudyJob | None:
    """Next job across the two queues; None when both are empty."""
    candidates = list(stat_queue) + list(routine_queue)
    if not candidates:
        return None
    return min(candidates, key=lambda j: scheduler_key(j, now, aging_threshold_ms))


def form_batch(pending, cfg: BatcherConfig, now: float,
               aging_threshold_ms: float = float("inf")):
    """Returns (batch, remaining) from a scheduler-ordered pending list.

    Effective-stat jobs dispatch immediately and never share a batch with
    unpromoted routine work. Routine-only batches dispatch when full or when
    the oldest member has waited in the batcher at least the window.
    """
    jobs = sorted(pending, key=lambda j: scheduler_key(j, now, aging_threshold_ms))
    if not jobs:
        return [], []
    if effective_stat(jobs[0], now, aging_threshold_ms):
        take = 1
        while (take < len(jobs) and take < cfg.max_batch
               and effective_stat(jobs[take], now, aging_threshold_ms)):
            take += 1
        return jobs[:take], jobs[take:]
    oldest_wait = now - min(j.batcher_arrival for j in jobs)
    # 1e-9 tolerance: a window timer firing exactly at expiry must dispatch
    # despite float rounding in (arrival + window) - arrival
    if len(jobs) >= cfg.max_batch or oldest_wait >= cfg.window_ms - 1e-9:
        return jobs[:cfg.max_batch], jobs[cfg.max_batch:]
    return [], jobs


def early_exit_decide(exit_head_probs, tau_exit: float):
    """(should_exit, label, confidence); exit iff max prob >= tau_exit."""
    probs = np.asarray(exit_head_probs, dtype=np.float64).ravel()
    if abs(probs.sum() - 1.0) > 1e-6:
        raise ValidationError(f"exit head probabilities sum to {probs.sum()}")
    if not 0.5 < tau_exit <= 1.0:
        raise ValidationError(f"tau_exit must be in (0.5, 1], got {tau_exit}")
    label = int(probs.argmax())
    conf = float(probs[label])
    return conf >= tau_exit, label, conf
