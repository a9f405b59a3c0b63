"""Learning-rate schedule: linear warmup then cosine decay to lr_min."""

from __future__ import annotations

import numpy as np


def lr_at(lr_max: float, lr_min: float, warmup_steps: int, total_steps: int,
          step: int) -> float:
    """Warmup for `warmup_steps`, cosine over `total_steps`, then flat lr_min."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    w, t = warmup_steps, total_steps
    if w > 0 and step < w:
        return lr_max * (step + 1) / w
    if step <= w + t and t > 0:
        phase = np.pi * (step - w) / t
        return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + float(np.cos(phase)))
    return lr_min
