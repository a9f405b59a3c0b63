"""Geometric and photometric augmentation of phantom samples.

Image and mask transform together (bilinear vs nearest); boxes are re-fit
to the transformed mask so the PhantomSample invariants keep holding. The
class label never changes: a transform that would erase the whole mask is
clamped back to identity.
"""

from __future__ import annotations

import numpy as np

from medrt.imageops import sample_bilinear, sample_nearest
from medrt.training.phantoms import LESION, PhantomSample, boxes_from_mask


def _rebuild(sample: PhantomSample, img: np.ndarray, mask: np.ndarray) -> PhantomSample:
    if sample.class_label == LESION and not mask.any():
        return sample  # degenerate transform: clamp to identity
    from medrt.nn.tensor import Tensor
    return PhantomSample(sample_id=sample.sample_id,
                         image=Tensor(img[None].astype(np.float32)),
                         class_label=sample.class_label,
                         mask=mask.astype(np.uint8),
                         boxes=boxes_from_mask(mask))


def flip_h(sample: PhantomSample) -> PhantomSample:
    img = sample.image.data[0][:, ::-1].copy()
    mask = sample.mask[:, ::-1].copy()
    return _rebuild(sample, img, mask)


def flip_v(sample: PhantomSample) -> PhantomSample:
    img = sample.image.data[0][::-1].copy()
    mask = sample.mask[::-1].copy()
    return _rebuild(sample, img, mask)


def rot90(sample: PhantomSample, k: int = 1) -> PhantomSample:
    img = np.rot90(sample.image.data[0], k).copy()
    mask = np.rot90(sample.mask, k).copy()
    return _rebuild(sample, img, mask)


def _warp(sample: PhantomSample, src_y: np.ndarray, src_x: np.ndarray) -> PhantomSample:
    img = sample.image.data[0]
    fill = float(np.median(img))
    new_img = sample_bilinear(img.astype(np.float64), src_y, src_x, fill=fill)
    new_mask = sample_nearest(sample.mask, src_y, src_x, fill=0)
    return _rebuild(sample, new_img, new_mask)


def rotate(sample: PhantomSample, angle_deg: float) -> PhantomSample:
    """Rotate about the image center; bilinear image, nearest mask."""
    h, w = sample.mask.shape
    theta = np.deg2rad(angle_deg)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    ct, st = np.cos(theta), np.sin(theta)
    # inverse map: destination -> source
    src_x = cx + (xx - cx) * ct - (yy - cy) * st
    src_y = cy + (xx - cx) * st + (yy - cy) * ct
    return _warp(sample, src_y, src_x)


def scale(sample: PhantomSample, factor: float) -> PhantomSample:
    """Zoom about the center (factor > 1 enlarges), same canvas size."""
    if factor <= 0:
        return sample
    h, w = sample.mask.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    src_x = cx + (xx - cx) / factor
    src_y = cy + (yy - cy) / factor
    return _warp(sample, src_y, src_x)


def contrast(sample: PhantomSample, gain: float) -> PhantomSample:
    img = sample.image.data[0].astype(np.float64)
    mu = img.mean()
    out = (img - mu) * gain + mu
    return _rebuild(sample, out, sample.mask.copy())


def elastic(sample: PhantomSample, grid_dy: np.ndarray, grid_dx: np.ndarray) -> PhantomSample:
    """Coarse-grid displacement field, bilinearly upsampled to pixel size.

    grid_dy/grid_dx are (4, 4) displacement control points in pixels; an
    all-zero grid is exactly the identity.
    """
    h, w = sample.mask.shape
    gy, gx = grid_dy.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # control-point coordinates in pixel space
    py = yy / (h - 1) * (gy - 1)
    px = xx / (w - 1) * (gx - 1)
    dy = sample_bilinear(grid_dy.astype(np.float64), py, px)
    dx = sample_bilinear(grid_dx.astype(np.float64), py, px)
    return _warp(sample, yy + dy, xx + dx)


def augment(sample: PhantomSample, rng: np.random.Generator) -> PhantomSample:
    """Random combined augmentation used by the training loop."""
    out = sample
    if rng.random() < 0.5:
        out = flip_h(out)
    k = int(rng.integers(0, 4))
    if k:
        out = rot90(out, k)
    pick = rng.random()
    if pick < 0.25:
        out = rotate(out, float(rng.uniform(-15, 15)))
    elif pick < 0.5:
        out = scale(out, float(rng.uniform(0.85, 1.15)))
    elif pick < 0.75:
        out = elastic(out, rng.uniform(-2.5, 2.5, (4, 4)), rng.uniform(-2.5, 2.5, (4, 4)))
    if rng.random() < 0.5:
        out = contrast(out, float(rng.uniform(0.8, 1.25)))
    return out
