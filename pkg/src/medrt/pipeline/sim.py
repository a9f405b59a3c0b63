"""Discrete-event simulation of the four-stage pipeline on a virtual clock.

Single-threaded and fully deterministic for a seeded workload: the event
heap is ordered by (time, sequence) and all randomness flows from one
generator. Scheduling semantics (priority, aging, micro-batching, early
exit, backpressure) are the shared policy functions from policy.py.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from medrt.errors import ConfigurationError, ValidationError
from medrt.pipeline.clock import VirtualClock
from medrt.pipeline.policy import (ROUTINE, STAT, BatcherConfig, StudyJob,
                                   form_batch, scheduler_key)
from medrt.pipeline.stats import STAGES, JobRecord, PipelineStats, build_stats


@dataclass(frozen=True)
class ServiceTimes:
    """Deterministic stage service-time model (milliseconds)."""
    ingest_ms: float = 0.2
    preprocess_ms: float = 0.6
    exit_head_ms: float = 0.1
    postprocess_ms: float = 0.6
    infer_overhead_ms: float = 1.0
    infer_per_image_ms: float = 5.0
    table: tuple[tuple[int, float], ...] = ()  # optional measured (batch, ms)

    def infer_ms(self, batch_size: int) -> float:
        if self.table:
            pts = sorted(self.table)
            if batch_size <= pts[0][0]:
                return pts[0][1]
            for (b0, t0), (b1, t1) in zip(pts, pts[1:]):
                if b0 <= batch_size <= b1:
                    frac = (batch_size - b0) / (b1 - b0)
                    return t0 + frac * (t1 - t0)
            if len(pts) > 1:
                (b0, t0), (b1, t1) = pts[-2], pts[-1]
                slope = (t1 - t0) / (b1 - b0)
            else:
                (b1, t1), slope = pts[0], 0.0
            return t1 + slope * (batch_size - b1)
        return self.infer_overhead_ms + batch_size * self.infer_per_image_ms

    @classmethod
    def from_device(cls, net, precision, profile, **kw):
        from medrt.compress.cost import estimate_cost
        report = estimate_cost(net, precision, profile)
        per_image = report.latency_ms - profile.overhead_ms
        return cls(infer_overhead_ms=profile.overhead_ms,
                   infer_per_image_ms=per_image, **kw)

    @classmethod
    def from_measurements(cls, table: dict[int, float], **kw):
        return cls(table=tuple(sorted((int(b), float(t)) for b, t in table.items())), **kw)


@dataclass(frozen=True)
class WorkloadSpec:
    arrival: str = "poisson"             # poisson | trace
    rate_per_s: float = 20.0
    duration_s: float = 10.0
    stat_fraction: float = 0.1
    seed: int = 0
    exit_prob: float = 0.0               # sim stand-in for model confidence
    trace: tuple = ()                    # ((t_ms, priority), ...) when arrival=trace
    service: ServiceTimes = field(default_factory=ServiceTimes)

    def __post_init__(self):
        if self.arrival not in ("poisson", "trace"):
            raise ConfigurationError(f"unknown arrival process {self.arrival!r}")
        if self.arrival == "poisson" and self.rate_per_s < 0:
            raise ConfigurationError("rate must be >= 0")
        if not 0 <= self.stat_fraction <= 1:
            raise ConfigurationError("stat_fraction must be in [0, 1]")
        if not 0 <= self.exit_prob <= 1:
            raise ConfigurationError("exit_prob must be in [0, 1]")

    def to_json(self) -> dict:
        return {"arrival": self.arrival, "rate_per_s": self.rate_per_s,
                "duration_s": self.duration_s, "stat_fraction": self.stat_fraction,
                "seed": self.seed, "exit_prob": self.exit_prob,
                "trace": [list(t) for t in self.trace],
                "service": {"ingest_ms": self.service.ingest_ms,
                            "preprocess_ms": self.service.preprocess_ms,
                            "exit_head_ms": self.service.exit_head_ms,
                            "postprocess_ms": self.service.postprocess_ms,
                            "infer_overhead_ms": self.service.infer_overhead_ms,
                            "infer_per_image_ms": self.service.infer_per_image_ms,
                            "table": [list(t) for t in self.service.table]}}

    @classmethod
    def from_json(cls, d: dict) -> "WorkloadSpec":
        svc = d.get("service", {})
        service = ServiceTimes(
            ingest_ms=svc.get("ingest_ms", 0.2),
            preprocess_ms=svc.get("preprocess_ms", 0.6),
            exit_head_ms=svc.get("exit_head_ms", 0.1),
            postprocess_ms=svc.get("postprocess_ms", 0.6),
            infer_overhead_ms=svc.get("infer_overhead_ms", 1.0),
            infer_per_image_ms=svc.get("infer_per_image_ms", 5.0),
            table=tuple((int(b), float(t)) for b, t in svc.get("table", ())))
        return cls(arrival=d.get("arrival", "poisson"),
                   rate_per_s=d.get("rate_per_s", 20.0),
                   duration_s=d.get("duration_s", 10.0),
                   stat_fraction=d.get("stat_fraction", 0.1),
                   seed=d.get("seed", 0), exit_prob=d.get("exit_prob", 0.0),
                   trace=tuple((float(t), p) for t, p in d.get("trace", ())),
                   service=service)


@dataclass(frozen=True)
class PipelineConfig:
    workers: dict = field(default_factory=lambda: {
        "ingest": 1, "preprocess": 1, "inference": 1, "postprocess": 1})
    queue_capacity: int = 64
    batcher: BatcherConfig = field(default_factory=BatcherConfig)
    aging_threshold_ms: float = 500.0
    tau_exit: float | None = None
    overload: str = "shed"  # intake policy: shed | block

    def __post_init__(self):
        if self.queue_capacity < 1:
            raise ValidationError("queue capacity must be >= 1")
        if self.overload not in ("shed", "block"):
            raise ValidationError(f"unknown overload policy {self.overload!r}")
        for stage in STAGES:
            if self.workers.get(stage, 0) < 1:
                raise ValidationError(f"stage {stage!r} needs >= 1 worker")
        if self.tau_exit is not None and not 0.5 < self.tau_exit <= 1.0:
            raise ValidationError("tau_exit must be in (0.5, 1]")


def _arrivals(workload: WorkloadSpec, rng: np.random.Generator):
    if workload.arrival == "trace":
        return [(float(t), p) for t, p in workload.trace]
    out = []
    t = 0.0
    horizon = workload.duration_s * 1000.0
    if workload.rate_per_s <= 0:
        return out
    mean_gap = 1000.0 / workload.rate_per_s
    while True:
        t += rng.exponential(mean_gap)
        if t >= horizon:
            break
        prio = STAT if rng.random() < workload.stat_fraction else ROUTINE
        out.append((t, prio))
    return out


class _Sim:
    def __init__(self, workload: WorkloadSpec, config: PipelineConfig,
                 clock: VirtualClock):
        self.w = workload
        self.cfg = config
        self.clock = clock
        self.rng = np.random.default_rng(workload.seed)
        self.heap: list = []
        self.seq = 0
        self.queues: dict[str, list[StudyJob]] = {s: [] for s in STAGES}
        self.free = dict(config.workers)
        self.records: dict[str, JobRecord] = {}
        self.intake_buffer: list[StudyJob] = []   # block policy only
        # backpressure: a stalled completion holds its worker until all its
        # jobs fit downstream
        self.blocked: list[tuple[StudyJob, str, int]] = []
        self.group_pending: dict[int, int] = {}
        self.group_stage: dict[int, str] = {}
        self.next_group = 0
        self.blocked_pushes = 0
        self.armed_timers: set[float] = set()
        self.depth_t: list[float] = []
        self.depths: dict[str, list[int]] = {s: [] for s in STAGES}
        horizon = (workload.duration_s if workload.arrival == "poisson"
                   else (workload.trace[-1][0] / 1000.0 if workload.trace else 1.0))
        self.sample_dt = max(horizon * 1000.0 / 200.0, 1.0)
        self.last_sample = -1e18

    # --- events ---------------------------------------------------------------

    def push_event(self, t: float, kind: str, payload=None):
        heapq.heappush(self.heap, (t, self.seq, kind, payload))
        self.seq += 1

    def sample_depths(self, force=False):
        now = self.clock.now()
        if not force and now - self.last_sample < self.sample_dt:
            return
        self.last_sample = now
        self.depth_t.append(now)
        for s in STAGES:
            self.depths[s].append(len(self.queues[s]))

    # --- queues ----------------------------------------------------------------

    def has_space(self, stage: str) -> bool:
        return len(self.queues[stage]) < self.cfg.queue_capacity

    def put(self, stage: str, job: StudyJob):
        if stage == "inference":
            job.batcher_arrival = self.clock.now()
        self.queues[stage].append(job)
        self.records[job.job_id].stage_wait_ms.setdefault(stage, self.clock.now())

    def submit(self, job: StudyJob):
        self.records[job.job_id] = JobRecord(
            job_id=job.job_id, priority=job.priority, submit_ms=job.enqueue_time)
        if self.has_space("ingest"):
            self.put("ingest", job)
        elif self.cfg.overload == "shed":
            rec = self.records[job.job_id]
            rec.outcome = "shed"
            rec.done_ms = self.clock.now()
        else:
            self.intake_buffer.append(job)
            self.blocked_pushes += 1

    def drain_releases(self):
        """Move stalled pushes and intake overflow into freed queue space."""
        progress = True
        while progress:
            progress = False
            for entry in list(self.blocked):
                job, target, gid = entry
                if self.has_space(target):
                    self.blocked.remove(entry)
                    self.put(target, job)
                    self.group_pending[gid] -= 1
                    if self.group_pending[gid] == 0:
                        self.free[self.group_stage[gid]] += 1
                        del self.group_pending[gid]
                        del self.group_stage[gid]
                    progress = True
            while self.intake_buffer and self.has_space("ingest"):
                self.put("ingest", self.intake_buffer.pop(0))
                progress = True

    # --- stage operation --------------------------------------------------------

    def service_time(self, stage: str) -> float:
        s = self.w.service
        if stage == "ingest":
            return s.ingest_ms
        if stage == "preprocess":
            return s.preprocess_ms + (s.exit_head_ms if self.cfg.tau_exit else 0.0)
        return s.postprocess_ms

    def route_after(self, stage: str, job: StudyJob) -> str | None:
        if stage == "ingest":
            return "preprocess"
        if stage == "preprocess":
            if self.cfg.tau_exit is not None and self.rng.random() < self.w.exit_prob:
                self.records[job.job_id].early_exit = True
                return "postprocess"
            return "inference"
        return None if stage == "postprocess" else "postprocess"

    def start_work(self):
        now = self.clock.now()
        for stage in ("ingest", "preprocess", "postprocess"):
            q = self.queues[stage]
            while self.free[stage] > 0 and q:
                q.sort(key=lambda j: scheduler_key(j, now, self.cfg.aging_threshold_ms))
                job = q.pop(0)
                self.drain_releases()
                self.free[stage] -= 1
                rec = self.records[job.job_id]
                rec.stage_wait_ms[stage] = now - rec.stage_wait_ms.get(stage, now)
                service = self.service_time(stage)
                rec.stage_service_ms[stage] = service
                self.push_event(now + service, "stage_done", (stage, [job]))
        q = self.queues["inference"]
        while self.free["inference"] > 0 and q:
            batch, remaining = form_batch(q, self.cfg.batcher, now,
                                          self.cfg.aging_threshold_ms)
            if not batch:
                expiry = min(j.batcher_arrival for j in q) + self.cfg.batcher.window_ms
                if expiry not in self.armed_timers:
                    self.armed_timers.add(expiry)
                    self.push_event(max(expiry, now), "batch_timer", expiry)
                break
            self.queues["inference"] = q = remaining
            self.drain_releases()
            self.free["inference"] -= 1
            service = self.w.service.infer_ms(len(batch))
            for job in batch:
                rec = self.records[job.job_id]
                rec.stage_wait_ms["inference"] = now - rec.stage_wait_ms.get("inference", now)
                rec.stage_service_ms["inference"] = service
                rec.batch_size = len(batch)
            self.push_event(now + service, "stage_done", ("inference", batch))

    def finish_stage(self, stage: str, jobs: list[StudyJob]):
        stalled: list[tuple[StudyJob, str]] = []
        for job in jobs:
            nxt = self.route_after(stage, job)
            if nxt is None:
                rec = self.records[job.job_id]
                rec.outcome = "completed"
                rec.done_ms = self.clock.now()
            elif self.has_space(nxt):
                self.put(nxt, job)
            else:
                stalled.append((job, nxt))
        if stalled:
            gid = self.next_group
            self.next_group += 1
            self.group_pending[gid] = len(stalled)
            self.group_stage[gid] = stage
            for job, target in stalled:
                self.blocked.append((job, target, gid))
                self.blocked_pushes += 1
        else:
            self.free[stage] += 1

    # --- main loop ----------------------------------------------------------------

    def run(self) -> tuple[PipelineStats, list[JobRecord]]:
        for i, (t, prio) in enumerate(_arrivals(self.w, self.rng)):
            self.push_event(t, "arrival",
                            StudyJob(job_id=f"sim-{i:06d}", priority=prio,
                                     enqueue_time=t, seq=i))
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            self.clock.advance_to(t)
            if kind == "arrival":
                self.submit(payload)
            elif kind == "stage_done":
                stage, jobs = payload
                self.finish_stage(stage, jobs)
                self.drain_releases()
            else:  # batch_timer
                self.armed_timers.discard(payload)
            self.sample_depths()
            self.start_work()
        self.sample_depths(force=True)
        depth_series = {"t_ms": self.depth_t, **self.depths}
        records = list(self.records.values())
        stats = build_stats(records, depth_series,
                            blocked_pushes=self.blocked_pushes,
                            saturated=self.detect_saturation())
        return stats, records

    def detect_saturation(self) -> bool:
        if any(r.outcome == "shed" for r in self.records.values()):
            return True
        totals = [sum(self.depths[s][i] for s in STAGES)
                  for i in range(len(self.depth_t))]
        if len(totals) < 8:
            return False
        quarter = len(totals) // 4
        head = float(np.mean(totals[:quarter]))
        tail = float(np.mean(totals[-quarter:]))
        return tail > max(4.0, 2.0 * (head + 1.0))


def run_sim(workload: WorkloadSpec, config: PipelineConfig,
            clock: VirtualClock | None = None,
            return_records: bool = False):
    """Deterministic virtual-clock simulation of the full pipeline."""
    stats, records = _Sim(workload, config, clock or VirtualClock()).run()
    return (stats, records) if return_records else stats


def load_workload(path_or_dict) -> WorkloadSpec:
    if isinstance(path_or_dict, dict):
        return WorkloadSpec.from_json(path_or_dict)
    with open(path_or_dict) as f:
        return WorkloadSpec.from_json(json.load(f))
