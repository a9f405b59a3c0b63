"""Threaded producer-consumer pipeline over real queues.

Stage workers communicate through bounded priority channels; scheduling,
batching, aging, and early-exit semantics come from policy.py, so behavior
matches the discrete-event simulator. Stats aggregate through one
lock-serialized collector.
"""

from __future__ import annotations

import datetime
import threading
import traceback
from dataclasses import dataclass, field

import numpy as np

from medrt.errors import OverloadError, ValidationError
from medrt.dicom.fhir import build_result
from medrt.nn.tensor import Tensor
from medrt.pipeline.clock import RealClock
from medrt.pipeline.policy import (ROUTINE, STAT, StudyJob, form_batch,
                                   scheduler_key)
from medrt.pipeline.sim import PipelineConfig
from medrt.pipeline.stats import STAGES, JobRecord, PipelineStats, build_stats
from medrt.pipeline.service import ModelBundle

_FAILURE_TRIP = 5  # consecutive failures before the circuit-open flag


@dataclass
class InferenceResult:
    job_id: str
    study_id: str
    task: str
    label: str
    score: float
    probs: list
    findings: list
    boxes: list
    mask_rle: str | None
    mask_shape: list | None
    dice_vs_reference: float | None
    early_exit: bool
    flagged_for_review: bool
    timings: dict
    overlay_png: bytes
    base_png: bytes
    saliency_png: bytes | None
    message_json: bytes
    model_id: str
    model_version: int
    created_at: str
    priority: str = ROUTINE


class Ticket:
    """Future for one submitted study."""

    def __init__(self, job_id: str):
        self.job_id = job_id
        self._event = threading.Event()
        self._callbacks: list = []
        self.result: InferenceResult | None = None
        self.error: Exception | None = None
        self.status = "queued"  # queued | done | failed | cancelled | shed

    def _resolve(self, status: str, result=None, error=None):
        self.status = status
        self.result = result
        self.error = error
        self._event.set()
        for fn in self._callbacks:
            fn(self)

    def add_callback(self, fn) -> None:
        if self._event.is_set():
            fn(self)
        else:
            self._callbacks.append(fn)

    def wait(self, timeout: float | None = None) -> bool:
        return self._event.wait(timeout)


class _Channel:
    """Bounded queue whose pop order follows the scheduler policy."""

    def __init__(self, capacity: int, aging_ms: float, clock):
        self.capacity = capacity
        self.aging_ms = aging_ms
        self.clock = clock
        self.items: list[StudyJob] = []
        self.lock = threading.Lock()
        self.not_empty = threading.Condition(self.lock)
        self.not_full = threading.Condition(self.lock)

    def try_put(self, job: StudyJob, block: bool) -> bool:
        with self.lock:
            while len(self.items) >= self.capacity:
                if not block:
                    return False
                self.not_full.wait(timeout=0.1)
            self.items.append(job)
            self.not_empty.notify()
            return True

    def depth(self) -> int:
        with self.lock:
            return len(self.items)

    def pop(self, timeout: float = 0.1) -> StudyJob | None:
        with self.lock:
            if not self.items:
                self.not_empty.wait(timeout=timeout)
            if not self.items:
                return None
            now = self.clock.now()
            self.items.sort(key=lambda j: scheduler_key(j, now, self.aging_ms))
            job = self.items.pop(0)
            self.not_full.notify()
            return job


class _Batcher:
    """Pending list + condition; inference workers pull formed batches."""

    def __init__(self, cfg, aging_ms: float, clock):
        self.cfg = cfg
        self.aging_ms = aging_ms
        self.clock = clock
        self.pending: list[StudyJob] = []
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)

    def put(self, job: StudyJob) -> None:
        with self.lock:
            job.batcher_arrival = self.clock.now()
            self.pending.append(job)
            self.cond.notify_all()

    def depth(self) -> int:
        with self.lock:
            return len(self.pending)

    def next_batch(self, timeout: float = 0.1) -> list[StudyJob]:
        deadline = self.clock.now() + timeout * 1000.0
        with self.lock:
            while True:
                now = self.clock.now()
                batch, remaining = form_batch(self.pending, self.cfg, now, self.aging_ms)
                if batch:
                    self.pending = remaining
                    return batch
                if self.pending:
                    expiry = min(j.batcher_arrival for j in self.pending) \
                        + self.cfg.window_ms
                    wait_s = max((min(expiry, deadline) - now), 0.0) / 1000.0 + 1e-4
                else:
                    wait_s = max(deadline - now, 0.0) / 1000.0
                if now >= deadline:
                    return []
                self.cond.wait(timeout=min(wait_s, 0.1))


class RunningPipeline:
    """Live four-stage pipeline bound to a model bundle."""

    def __init__(self, config: PipelineConfig, bundle: ModelBundle, clock=None):
        self.config = config
        self.bundle = bundle
        self.clock = clock or RealClock()
        self.lock = threading.Lock()
        self.records: dict[str, JobRecord] = {}
        self.tickets: dict[str, Ticket] = {}
        self.decoded: dict[str, object] = {}
        self.input_tensors: dict[str, Tensor] = {}
        self.exit_probs: dict[str, np.ndarray] = {}
        self.cancelled: set[str] = set()
        self.seq = 0
        self.blocked_pushes = 0
        self.consecutive_failures = 0
        self.circuit_open = False
        self.running = False
        self.inflight = 0
        self.drained = threading.Condition(self.lock)
        aging = config.aging_threshold_ms
        self.ingest_q = _Channel(config.queue_capacity, aging, self.clock)
        self.preprocess_q = _Channel(config.queue_capacity, aging, self.clock)
        self.batcher = _Batcher(config.batcher, aging, self.clock)
        self.postprocess_q = _Channel(config.queue_capacity, aging, self.clock)
        self.threads: list[threading.Thread] = []
        self.depth_t: list[float] = []
        self.depths: dict[str, list[int]] = {s: [] for s in STAGES}
        self._last_sample = -1e18

    # --- lifecycle -------------------------------------------------------------

    def start(self) -> "RunningPipeline":
        self.running = True
        for i in range(self.config.workers["ingest"]):
            self._spawn(self._ingest_loop, f"ingest-{i}")
        for i in range(self.config.workers["preprocess"]):
            self._spawn(self._preprocess_loop, f"preprocess-{i}")
        for i in range(self.config.workers["inference"]):
            self._spawn(self._inference_loop, f"inference-{i}")
        for i in range(self.config.workers["postprocess"]):
            self._spawn(self._postprocess_loop, f"postprocess-{i}")
        return self

    def _spawn(self, fn, name):
        t = threading.Thread(target=fn, name=name, daemon=True)
        t.start()
        self.threads.append(t)

    def shutdown(self, drain: bool = True, timeout: float = 30.0) -> None:
        if drain:
            with self.drained:
                if self.inflight > 0:
                    self.drained.wait_for(lambda: self.inflight == 0, timeout=timeout)
        self.running = False
        for t in self.threads:
            t.join(timeout=2.0)

    # --- intake ------------------------------------------------------------------

    def submit(self, job: StudyJob) -> Ticket:
        if not self.running:
            raise ValidationError("pipeline is not running")
        with self.lock:
            if job.job_id in self.tickets:
                raise ValidationError(f"duplicate job id {job.job_id!r}")
            job.enqueue_time = self.clock.now()
            job.seq = self.seq
            self.seq += 1
            ticket = Ticket(job.job_id)
            self.tickets[job.job_id] = ticket
            rec = JobRecord(job_id=job.job_id, priority=job.priority,
                            submit_ms=job.enqueue_time)
            rec.stage_wait_ms["ingest"] = job.enqueue_time  # anchor for queue wait
            self.records[job.job_id] = rec
            self.inflight += 1
        block = self.config.overload == "block"
        if not self.ingest_q.try_put(job, block=block):
            depth = self.ingest_q.depth()
            with self.lock:
                rec = self.records[job.job_id]
                rec.outcome = "shed"
                rec.done_ms = self.clock.now()
                self.inflight -= 1
            ticket._resolve("shed", error=OverloadError(
                f"ingest queue full ({depth} deep)", queue_depth=depth))
            raise OverloadError(f"ingest queue full ({depth} deep)", queue_depth=depth)
        self._sample_depths()
        return ticket

    def cancel(self, job_id: str) -> bool:
        with self.lock:
            ticket = self.tickets.get(job_id)
            if ticket is None or ticket.status != "queued":
                return False
            self.cancelled.add(job_id)
            return True

    def escalate(self, job_id: str) -> bool:
        """Raise a queued job to stat priority (affects future scheduling)."""
        for holder in (self.ingest_q, self.preprocess_q):
            with holder.lock:
                for job in holder.items:
                    if job.job_id == job_id:
                        job.priority = STAT
                        self._record_priority(job_id, STAT)
                        return True
        with self.batcher.lock:
            for job in self.batcher.pending:
                if job.job_id == job_id:
                    job.priority = STAT
                    self.batcher.cond.notify_all()
                    self._record_priority(job_id, STAT)
                    return True
        return False

    def _record_priority(self, job_id, priority):
        with self.lock:
            if job_id in self.records:
                self.records[job_id].priority = priority

    # --- workers -------------------------------------------------------------------

    def _check_cancel(self, job: StudyJob) -> bool:
        with self.lock:
            if job.job_id not in self.cancelled:
                return False
            rec = self.records[job.job_id]
            rec.outcome = "cancelled"
            rec.done_ms = self.clock.now()
            self.inflight -= 1
            self.drained.notify_all()
            ticket = self.tickets[job.job_id]
            for store in (self.decoded, self.input_tensors, self.exit_probs):
                store.pop(job.job_id, None)
        ticket._resolve("cancelled")
        return True

    def _fail(self, job: StudyJob, err: Exception) -> None:
        with self.lock:
            rec = self.records[job.job_id]
            rec.outcome = "failed"
            rec.done_ms = self.clock.now()
            self.inflight -= 1
            self.drained.notify_all()
            self.consecutive_failures += 1
            if self.consecutive_failures >= _FAILURE_TRIP:
                self.circuit_open = True
            ticket = self.tickets[job.job_id]
        ticket._resolve("failed", error=err)

    def _stage_timing(self, job: StudyJob, stage: str, start: float) -> None:
        end = self.clock.now()
        with self.lock:
            rec = self.records[job.job_id]
            rec.stage_service_ms[stage] = end - start
            wait_anchor = rec.stage_wait_ms.get(stage)
            if wait_anchor is not None:
                rec.stage_wait_ms[stage] = start - wait_anchor

    def _mark_enqueue(self, job: StudyJob, stage: str) -> None:
        with self.lock:
            self.records[job.job_id].stage_wait_ms[stage] = self.clock.now()

    def _ingest_loop(self):
        while self.running:
            job = self.ingest_q.pop()
            if job is None:
                continue
            if self._check_cancel(job):
                continue
            start = self.clock.now()
            try:
                decoded = self.bundle.decode(job.payload)
                with self.lock:
                    self.decoded[job.job_id] = decoded
            except Exception as e:  # malformed study
                self._stage_timing(job, "ingest", start)
                self._fail(job, e)
                continue
            self._stage_timing(job, "ingest", start)
            self._mark_enqueue(job, "preprocess")
            self.preprocess_q.try_put(job, block=True)
            self._sample_depths()

    def _preprocess_loop(self):
        while self.running:
            job = self.preprocess_q.pop()
            if job is None:
                continue
            if self._check_cancel(job):
                continue
            start = self.clock.now()
            try:
                decoded = self.decoded[job.job_id]
                x = decoded.normalized
                with self.lock:
                    self.input_tensors[job.job_id] = x
                should_exit, probs = self.bundle.exit_check(x)
                if should_exit:
                    with self.lock:
                        self.exit_probs[job.job_id] = probs
            except Exception as e:
                self._stage_timing(job, "preprocess", start)
                self._fail(job, e)
                continue
            self._stage_timing(job, "preprocess", start)
            if job.job_id in self.exit_probs:
                self._mark_enqueue(job, "postprocess")
                self.postprocess_q.try_put(job, block=True)
            else:
                self._mark_enqueue(job, "inference")
                self.batcher.put(job)
            self._sample_depths()

    def _inference_loop(self):
        while self.running:
            batch = self.batcher.next_batch()
            if not batch:
                continue
            live = [j for j in batch if not self._check_cancel(j)]
            if not live:
                continue
            start = self.clock.now()
            try:
                xs = np.concatenate([self.input_tensors[j.job_id].data[None]
                                     for j in live], axis=0)
                outputs = self.bundle.infer(Tensor(xs))
            except Exception as e:
                for j in live:
                    self._stage_timing(j, "inference", start)
                    self._fail(j, e)
                continue
            end_now = self.clock.now()
            with self.lock:
                for j in live:
                    rec = self.records[j.job_id]
                    rec.stage_service_ms["inference"] = end_now - start
                    anchor = rec.stage_wait_ms.get("inference")
                    if anchor is not None:
                        rec.stage_wait_ms["inference"] = start - anchor
                    rec.batch_size = len(live)
            for j, out in zip(live, outputs):
                with self.lock:
                    self.decoded[j.job_id].output = out
                self._mark_enqueue(j, "postprocess")
                self.postprocess_q.try_put(j, block=True)
            self._sample_depths()

    def _postprocess_loop(self):
        while self.running:
            job = self.postprocess_q.pop()
            if job is None:
                continue
            start = self.clock.now()
            try:
                result = self._assemble(job, start)
            except Exception as e:
                traceback.print_exc()
                self._stage_timing(job, "postprocess", start)
                self._fail(job, e)
                continue
            with self.lock:
                rec = self.records[job.job_id]
                rec.outcome = "completed"
                rec.done_ms = self.clock.now()
                rec.early_exit = result.early_exit
                self.inflight -= 1
                self.consecutive_failures = 0
                self.drained.notify_all()
                ticket = self.tickets[job.job_id]
                for store in (self.decoded, self.input_tensors, self.exit_probs):
                    store.pop(job.job_id, None)
            ticket._resolve("done", result=result)
            self._sample_depths()

    def _assemble(self, job: StudyJob, start: float) -> InferenceResult:
        decoded = self.decoded[job.job_id]
        early = self.exit_probs.get(job.job_id)
        output = getattr(decoded, "output", None) or {"probs": None, "mask_probs": None}
        reference = job.metadata.get("reference_mask")
        post = self.bundle.postprocess(decoded.raw_resized, output,
                                       early_probs=early, reference_mask=reference)
        self._stage_timing(job, "postprocess", start)
        with self.lock:
            rec = self.records[job.job_id]
            done = self.clock.now()
            timings = {"queue_ms": sum(v for v in rec.stage_wait_ms.values()),
                       "end_to_end_ms": done - rec.submit_ms}
            for stage in STAGES:
                if stage in rec.stage_service_ms:
                    timings[f"{stage}_ms"] = rec.stage_service_ms[stage]
        created = datetime.datetime.now(datetime.timezone.utc) \
            .isoformat(timespec="seconds")
        study_id = job.metadata.get("study_id", job.job_id)
        task = "classification" if post["early_exit"] else self.bundle.task_name()
        message = build_result(
            {"study_id": study_id, "model_id": self.bundle.classifier.model_id,
             "model_version": self.bundle.classifier.version, "task": task,
             "created_at": created},
            {k: post.get(k) for k in ("findings", "early_exit", "flagged_for_review",
                                      "mask_rle", "mask_shape", "dice_vs_reference")
             if post.get(k) is not None or k in ("findings",)},
            timings)
        return InferenceResult(
            job_id=job.job_id, study_id=study_id, task=task, label=post["label"],
            score=post["score"], probs=post["probs"], findings=post["findings"],
            boxes=post["boxes"], mask_rle=post["mask_rle"],
            mask_shape=post["mask_shape"],
            dice_vs_reference=post["dice_vs_reference"],
            early_exit=post["early_exit"],
            flagged_for_review=post["flagged_for_review"], timings=timings,
            overlay_png=post["overlay_png"], base_png=post["base_png"],
            saliency_png=post["saliency_png"], message_json=message,
            model_id=self.bundle.classifier.model_id,
            model_version=self.bundle.classifier.version, created_at=created,
            priority=job.priority)

    # --- stats ------------------------------------------------------------------

    def _sample_depths(self):
        now = self.clock.now()
        with self.lock:
            if now - self._last_sample < 50.0:
                return
            self._last_sample = now
            self.depth_t.append(now)
            self.depths["ingest"].append(self.ingest_q.depth())
            self.depths["preprocess"].append(self.preprocess_q.depth())
            self.depths["inference"].append(self.batcher.depth())
            self.depths["postprocess"].append(self.postprocess_q.depth())

    def queue_depths(self) -> dict:
        return {"ingest": self.ingest_q.depth(),
                "preprocess": self.preprocess_q.depth(),
                "inference": self.batcher.depth(),
                "postprocess": self.postprocess_q.depth()}

    def stats(self) -> PipelineStats:
        with self.lock:
            records = [JobRecord(job_id=r.job_id, priority=r.priority,
                                 submit_ms=r.submit_ms,
                                 stage_service_ms=dict(r.stage_service_ms),
                                 stage_wait_ms=dict(r.stage_wait_ms),
                                 batch_size=r.batch_size, early_exit=r.early_exit,
                                 outcome=r.outcome, done_ms=r.done_ms)
                       for r in self.records.values()]
            depth_series = {"t_ms": list(self.depth_t),
                            **{s: list(self.depths[s]) for s in STAGES}}
            circuit = self.circuit_open
        done = [r for r in records if r.outcome != "pending"]
        return build_stats(done, depth_series, blocked_pushes=self.blocked_pushes,
                           circuit_open=circuit)


def run_pipeline(config: PipelineConfig, bundle: ModelBundle,
                 clock=None) -> RunningPipeline:
    """Start the threaded pipeline; caller owns shutdown()."""
    return RunningPipeline(config, bundle, clock).start()
