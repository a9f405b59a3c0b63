"""ResultMessage canonical JSON."""

import json

import pytest

from medrt.errors import ValidationError
from medrt.dicom import build_result


def _study():
    return {"study_id": "st-1", "model_id": "tiny_class_net", "model_version": 3,
            "task": "classification", "created_at": "2026-08-09T10:00:00Z"}


def _timings():
    return {"queue_ms": 2.0, "ingest_ms": 0.4, "preprocess_ms": 0.8,
            "inference_ms": 3.0, "postprocess_ms": 1.0, "end_to_end_ms": 7.5}


def test_classification_finding_mapping():
    blob = build_result(_study(), {"findings": [{"label": "lesion", "score": 0.93}]},
                        _timings())
    doc = json.loads(blob)
    assert doc["findings"] == [{"label": "lesion", "score": 0.93}]
    assert doc["resource_kind"] == "diagnostic-report"


def test_byte_identical_for_same_inputs():
    a = build_result(_study(), {"findings": []}, _timings())
    b = build_result(_study(), {"findings": []}, _timings())
    assert a == b
    assert json.loads(a) == json.loads(b)


def test_end_to_end_dominates_stages():
    doc = json.loads(build_result(_study(), {"findings": []}, _timings()))
    stages = [v for k, v in doc["timings"].items()
              if k.endswith("_ms") and k not in ("end_to_end_ms", "queue_ms")]
    assert doc["timings"]["end_to_end_ms"] >= max(stages)
    bad = _timings()
    bad["end_to_end_ms"] = 0.5
    with pytest.raises(ValidationError):
        build_result(_study(), {"findings": []}, bad)


def test_missing_timings_rejected():
    with pytest.raises(ValidationError):
        build_result(_study(), {"findings": []}, {"queue_ms": 1.0})


def test_float_formatting_is_4_decimals():
    t = _timings()
    t["inference_ms"] = 3.00001234
    doc = json.loads(build_result(_study(), {"findings": []}, t))
    assert doc["timings"]["inference_ms"] == 3.0


def test_score_range_validated():
    with pytest.raises(ValidationError):
        build_result(_study(), {"findings": [{"label": "x", "score": 1.2}]}, _timings())
