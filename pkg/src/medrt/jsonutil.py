"""Canonical JSON: sorted keys, floats rounded to 4 decimals, compact."""

from __future__ import annotations

import json


def _canonical(value):
    if isinstance(value, float):
        return round(value, 4)
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def canonical_json(payload) -> bytes:
    return json.dumps(_canonical(payload), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
