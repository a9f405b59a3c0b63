"""Shared 2-D raster helpers: normalization, bilinear/nearest resampling.

Used by the DICOM preprocessing path, the augmentation pipeline, and the
saliency renderers; kept free of any model or I/O dependencies.
"""

from __future__ import annotations

import numpy as np

SIGMA_FLOOR = 1e-6


def normalize(img: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per image (sigma floored at 1e-6)."""
    img = img.astype(np.float32)
    mu = img.mean()
    sigma = img.std()
    return (img - mu) / max(float(sigma), SIGMA_FLOOR)


def sample_bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                    fill: float = 0.0) -> np.ndarray:
    """Bilinear sample img[y, x] at fractional coordinates; out of range -> fill."""
    h, w = img.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = (ys - y0).astype(img.dtype if img.dtype.kind == "f" else np.float32)
    fx = (xs - x0).astype(fy.dtype)

    def at(yy, xx):
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = np.full(yy.shape, fill, dtype=np.float64)
        vals[inside] = img[yy[inside], xx[inside]]
        return vals

    v00 = at(y0, x0)
    v01 = at(y0, x0 + 1)
    v10 = at(y0 + 1, x0)
    v11 = at(y0 + 1, x0 + 1)
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def sample_nearest(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                   fill=0) -> np.ndarray:
    h, w = img.shape
    yy = np.rint(ys).astype(np.int64)
    xx = np.rint(xs).astype(np.int64)
    inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
    out = np.full(yy.shape, fill, dtype=img.dtype)
    out[inside] = img[yy[inside], xx[inside]]
    return out


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centered bilinear resize (clamped at the borders)."""
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.astype(np.float32).copy()
    sy = h / out_h
    sx = w / out_w
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * sy - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * sx - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    yg, xg = np.meshgrid(ys, xs, indexing="ij")
    return sample_bilinear(img.astype(np.float64), yg, xg)
