"""FHIR-shaped diagnostic-report JSON.

Canonical form: keys sorted, every float rounded to 4 decimals, compact
separators. Identical inputs therefore always serialize to identical bytes.
"""

from __future__ import annotations

from medrt.errors import ValidationError
from medrt.jsonutil import canonical_json

RESOURCE_KIND = "diagnostic-report"
TASKS = ("classification", "segmentation", "detection")
REQUIRED_TIMINGS = ("queue_ms", "end_to_end_ms")


def build_result(study: dict, outputs: dict, timings: dict) -> bytes:
    """Assemble + validate the ResultMessage; returns canonical JSON bytes.

    study: study_id, model_id, model_version, task, created_at
    outputs: findings list, flags dict, optional mask_rle / dice_vs_reference
    timings: queue_ms, stage fields (..._ms), end_to_end_ms
    """
    for key in ("study_id", "model_id", "model_version", "task", "created_at"):
        if key not in study:
            raise ValidationError(f"study metadata missing {key!r}")
    if study["task"] not in TASKS:
        raise ValidationError(f"unknown task {study['task']!r}")
    for key in REQUIRED_TIMINGS:
        if key not in timings:
            raise ValidationError(f"timings missing {key!r}")
    stage_values = [v for k, v in timings.items()
                    if k.endswith("_ms") and k not in ("end_to_end_ms", "queue_ms")]
    if stage_values and timings["end_to_end_ms"] < max(stage_values) - 1e-9:
        raise ValidationError("end-to-end time below a stage time")
    findings = outputs.get("findings", [])
    for f in findings:
        score = f.get("score")
        if score is not None and not 0.0 <= score <= 1.0:
            raise ValidationError(f"finding score {score} outside [0, 1]")

    message = {
        "resource_kind": RESOURCE_KIND,
        "study_id": study["study_id"],
        "model_id": study["model_id"],
        "model_version": study["model_version"],
        "task": study["task"],
        "created_at": study["created_at"],
        "findings": findings,
        "flags": {
            "early_exit": bool(outputs.get("early_exit", False)),
            "flagged_for_review": bool(outputs.get("flagged_for_review", False)),
        },
        "timings": timings,
    }
    if "mask_rle" in outputs:
        message["mask"] = {"rle": outputs["mask_rle"],
                           "shape": outputs.get("mask_shape")}
    if "dice_vs_reference" in outputs and outputs["dice_vs_reference"] is not None:
        message["dice_vs_reference"] = outputs["dice_vs_reference"]
    return canonical_json(message)
