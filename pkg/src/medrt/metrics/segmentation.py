"""Binary mask overlap metrics."""

from __future__ import annotations

import numpy as np

from medrt.errors import DimensionError


def _pair(a, b):
    a = np.asarray(a) != 0
    b = np.asarray(b) != 0
    if a.shape != b.shape:
        raise DimensionError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def dice(a, b) -> float:
    """2|A.B| / (|A| + |B|); both masks empty -> 1.0."""
    a, b = _pair(a, b)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / denom


def iou_mask(a, b) -> float:
    """|A.B| / |A+B|; both masks empty -> 1.0."""
    a, b = _pair(a, b)
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union


def pixel_accuracy(a, b) -> float:
    a, b = _pair(a, b)
    return float((a == b).mean())
