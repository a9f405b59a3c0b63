"""Threaded pipeline: end-to-end jobs, cancellation, failures, drain."""

import json
import time

import numpy as np
import pytest

from medrt.errors import OverloadError
from medrt.dicom import build_phantom_dicom, write
from medrt.nn import build
from medrt.pipeline import (BatcherConfig, ModelBundle, PipelineConfig, StudyJob,
                            Thresholds, run_pipeline)
from medrt.training import DatasetSpec, generate_phantoms


def _dicom_bytes(seed=21, n=4):
    samples = generate_phantoms(DatasetSpec(seed=seed, count=n, lesion_prob=1.0))
    return [write(build_phantom_dicom(s.image.data, f"P^{i}", f"ID{i}"))
            for i, s in enumerate(samples)], samples


def _bundle(unet=True, **kw):
    classifier = build("tiny_class_net", seed=1)
    mask_model = build("mini_unet", seed=2) if unet else None
    return ModelBundle(classifier, mask_model, **kw)


def _cfg(**kw):
    base = dict(workers={"ingest": 1, "preprocess": 1, "inference": 1,
                         "postprocess": 1},
                queue_capacity=16, batcher=BatcherConfig(max_batch=4, window_ms=5.0))
    base.update(kw)
    return PipelineConfig(**base)


def test_single_job_end_to_end():
    blobs, _ = _dicom_bytes(n=1)
    pipe = run_pipeline(_cfg(), _bundle())
    try:
        ticket = pipe.submit(StudyJob(job_id="j1", payload=blobs[0],
                                      metadata={"study_id": "st-1"}))
        assert ticket.wait(timeout=30)
        assert ticket.status == "done"
        res = ticket.result
        assert res.label in ("lesion", "no-lesion")
        assert res.overlay_png.startswith(b"\x89PNG")
        msg = json.loads(res.message_json)
        assert msg["study_id"] == "st-1"
        assert msg["timings"]["end_to_end_ms"] >= msg["timings"]["inference_ms"]
        assert res.mask_rle is not None
    finally:
        pipe.shutdown()
    stats = pipe.stats()
    assert stats.completed == 1 and stats.submitted == 1


def test_all_jobs_resolve_and_conserve():
    blobs, _ = _dicom_bytes(n=4)
    pipe = run_pipeline(_cfg(), _bundle(unet=False))
    tickets = []
    try:
        for i, b in enumerate(blobs):
            prio = "stat" if i == 0 else "routine"
            tickets.append(pipe.submit(StudyJob(job_id=f"j{i}", priority=prio,
                                                payload=b)))
        for t in tickets:
            assert t.wait(timeout=30)
    finally:
        pipe.shutdown()
    stats = pipe.stats()
    assert stats.submitted == 4
    assert stats.completed + stats.shed + stats.cancelled + stats.failed == 4
    assert stats.completed == 4


def test_shutdown_drains_in_flight():
    blobs, _ = _dicom_bytes(n=3)
    pipe = run_pipeline(_cfg(), _bundle(unet=False))
    tickets = [pipe.submit(StudyJob(job_id=f"d{i}", payload=b))
               for i, b in enumerate(blobs)]
    pipe.shutdown(drain=True)
    assert all(t.status == "done" for t in tickets)


def test_malformed_study_fails_typed_and_pipeline_survives():
    blobs, _ = _dicom_bytes(n=1)
    pipe = run_pipeline(_cfg(), _bundle(unet=False))
    try:
        bad = pipe.submit(StudyJob(job_id="bad", payload=b"not a dicom file"))
        assert bad.wait(timeout=10)
        assert bad.status == "failed"
        good = pipe.submit(StudyJob(job_id="good", payload=blobs[0]))
        assert good.wait(timeout=30)
        assert good.status == "done"
    finally:
        pipe.shutdown()
    stats = pipe.stats()
    assert stats.failed == 1 and stats.completed == 1
    assert not stats.circuit_open


def test_repeated_failures_open_circuit():
    pipe = run_pipeline(_cfg(), _bundle(unet=False))
    try:
        tickets = [pipe.submit(StudyJob(job_id=f"b{i}", payload=b"garbage"))
                   for i in range(5)]
        for t in tickets:
            t.wait(timeout=10)
    finally:
        pipe.shutdown()
    assert pipe.stats().circuit_open


class _SlowDecodeBundle(ModelBundle):
    def decode(self, dicom_bytes):
        time.sleep(0.12)
        return super().decode(dicom_bytes)


def test_cancel_before_inference():
    blobs, _ = _dicom_bytes(n=2)
    classifier = build("tiny_class_net", seed=1)
    pipe = run_pipeline(_cfg(), _SlowDecodeBundle(classifier))
    try:
        first = pipe.submit(StudyJob(job_id="c0", payload=blobs[0]))
        victim = pipe.submit(StudyJob(job_id="c1", payload=blobs[1]))
        assert pipe.cancel("c1")  # still queued behind the slow decode
        assert victim.wait(timeout=10)
        assert victim.status == "cancelled"
        assert first.wait(timeout=30) and first.status == "done"
    finally:
        pipe.shutdown()
    stats = pipe.stats()
    assert stats.cancelled == 1 and stats.completed == 1


def test_duplicate_job_id_rejected():
    from medrt.errors import ValidationError
    blobs, _ = _dicom_bytes(n=1)
    pipe = run_pipeline(_cfg(), _bundle(unet=False))
    try:
        pipe.submit(StudyJob(job_id="dup", payload=blobs[0]))
        with pytest.raises(ValidationError):
            pipe.submit(StudyJob(job_id="dup", payload=blobs[0]))
    finally:
        pipe.shutdown()


def test_shed_under_overload():
    blobs, _ = _dicom_bytes(n=1)
    classifier = build("tiny_class_net", seed=1)
    pipe = run_pipeline(_cfg(queue_capacity=1), _SlowDecodeBundle(classifier))
    shed = 0
    try:
        for i in range(6):
            try:
                pipe.submit(StudyJob(job_id=f"o{i}", payload=blobs[0]))
            except OverloadError as e:
                shed += 1
                assert e.queue_depth >= 1
    finally:
        pipe.shutdown()
    assert shed >= 1
    assert pipe.stats().shed == shed


def test_early_exit_marks_result():
    blobs, samples = _dicom_bytes(n=1)
    classifier = build("tiny_class_net", seed=1)
    # tau barely above half so the untrained head exits immediately
    bundle = ModelBundle(classifier, None, use_early_exit=True,
                         thresholds=Thresholds(tau_exit=0.500001))
    pipe = run_pipeline(_cfg(tau_exit=0.500001), bundle)
    try:
        t = pipe.submit(StudyJob(job_id="e0", payload=blobs[0]))
        assert t.wait(timeout=30)
        assert t.status == "done"
        assert t.result.early_exit
        assert json.loads(t.result.message_json)["flags"]["early_exit"]
    finally:
        pipe.shutdown()
    assert pipe.stats().early_exits == 1
