"""Built-in 256-entry colormaps.

Shipped as fixed tables (computed once at import from closed-form anchors)
so rendering never depends on plotting libraries or their versions.
"""

from __future__ import annotations

import numpy as np

from medrt.errors import ValidationError


def _hot_table() -> np.ndarray:
    t = np.linspace(0.0, 1.0, 256)
    r = np.clip(3 * t, 0, 1)
    g = np.clip(3 * t - 1, 0, 1)
    b = np.clip(3 * t - 2, 0, 1)
    return (np.stack([r, g, b], axis=1) * 255).round().astype(np.uint8)


_VIRIDIS_ANCHORS = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=np.float64)


def _viridis_like_table() -> np.ndarray:
    xs = np.linspace(0, 1, len(_VIRIDIS_ANCHORS))
    t = np.linspace(0, 1, 256)
    chans = [np.interp(t, xs, _VIRIDIS_ANCHORS[:, c]) for c in range(3)]
    return np.stack(chans, axis=1).round().astype(np.uint8)


COLORMAPS = {"hot": _hot_table(), "viridis": _viridis_like_table()}


def apply_colormap(values: np.ndarray, name: str = "hot") -> np.ndarray:
    """values in [0, 1] -> (..., 3) uint8 RGB."""
    if name not in COLORMAPS:
        raise ValidationError(f"unknown colormap {name!r}")
    idx = np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255), 0, 255)
    return COLORMAPS[name][idx.astype(np.intp)]
