"""Loss functions with analytic gradients w.r.t. the predictions.

All of them clamp probabilities at eps=1e-7 and return (scalar, grad) where
grad has the prediction's shape.
"""

from __future__ import annotations

import numpy as np

from medrt.errors import DimensionError, ValidationError

EPS = 1e-7


def _clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, EPS, 1.0 - EPS)


def loss_ce(pred: np.ndarray, labels: np.ndarray):
    """Categorical cross-entropy over class probabilities (N, K)."""
    pred = np.asarray(pred, dtype=np.float64)
    labels = np.asarray(labels)
    if pred.ndim != 2 or labels.shape != (pred.shape[0],):
        raise DimensionError(f"pred {pred.shape} vs labels {labels.shape}")
    n = pred.shape[0]
    p = _clamp(pred)
    picked = p[np.arange(n), labels]
    loss = float(-np.log(picked).mean())
    grad = np.zeros_like(pred)
    grad[np.arange(n), labels] = -1.0 / (n * picked)
    grad[(pred < EPS) | (pred > 1 - EPS)] = 0.0
    return loss, grad


def loss_bce_dice(pred: np.ndarray, target: np.ndarray,
                  alpha: float = 0.5, dice_eps: float = 1.0):
    """alpha * BCE + (1 - alpha) * soft-Dice over the whole batch."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"pred {pred.shape} vs target {target.shape}")
    if not 0 <= alpha <= 1:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    p = _clamp(pred)
    n = pred.size
    bce = float(-(target * np.log(p) + (1 - target) * np.log(1 - p)).mean())
    dbce = (-(target / p) + (1 - target) / (1 - p)) / n

    sp, sg, spg = float(p.sum()), float(target.sum()), float((p * target).sum())
    denom = sp + sg + dice_eps
    dice_term = 1.0 - (2 * spg + dice_eps) / denom
    ddice = -(2 * target * denom - (2 * spg + dice_eps)) / denom ** 2

    loss = alpha * bce + (1 - alpha) * dice_term
    grad = alpha * dbce + (1 - alpha) * ddice
    grad[(pred < EPS) | (pred > 1 - EPS)] = 0.0
    return float(loss), grad


def loss_focal(pred: np.ndarray, target: np.ndarray,
               alpha_f: float = 0.25, gamma: float = 2.0):
    """Binary focal loss on probabilities; gamma=0 is alpha-weighted BCE."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"pred {pred.shape} vs target {target.shape}")
    p = _clamp(pred)
    pt = np.where(target > 0.5, p, 1.0 - p)
    at = np.where(target > 0.5, alpha_f, 1.0 - alpha_f)
    n = pred.size
    loss = float((-at * (1 - pt) ** gamma * np.log(pt)).mean())
    if gamma > 0:
        dpt = at * (gamma * (1 - pt) ** (gamma - 1) * np.log(pt)
                    - (1 - pt) ** gamma / pt)
    else:
        dpt = -at / pt
    sign = np.where(target > 0.5, 1.0, -1.0)
    grad = dpt * sign / n
    grad[(pred < EPS) | (pred > 1 - EPS)] = 0.0
    return loss, grad


def _box_valid(b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (4,):
        raise ValidationError(f"box must be (x0, y0, x1, y1), got shape {b.shape}")
    if not (b[2] > b[0] and b[3] > b[1]):
        raise ValidationError(f"degenerate box {b.tolist()}")
    return b


def giou(box_a, box_b) -> float:
    """Generalized IoU of two (x0, y0, x1, y1) boxes."""
    a = _box_valid(box_a)
    b = _box_valid(box_b)
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    cw = max(a[2], b[2]) - min(a[0], b[0])
    ch = max(a[3], b[3]) - min(a[1], b[1])
    c = cw * ch
    return inter / union - (c - union) / c


def loss_giou(box_pred, box_gt):
    """1 - GIoU with an analytic gradient w.r.t. the predicted box."""
    a = _box_valid(box_pred)
    b = _box_valid(box_gt)

    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    overlap = ix > 0 and iy > 0
    inter = ix * iy if overlap else 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    cw = max(a[2], b[2]) - min(a[0], b[0])
    ch = max(a[3], b[3]) - min(a[1], b[1])
    c = cw * ch
    g = inter / union - (c - union) / c
    loss = 1.0 - g

    # d(inter)/da
    dix = np.zeros(4)
    diy = np.zeros(4)
    if overlap:
        if a[2] < b[2]:
            dix[2] = 1.0
        if a[0] > b[0]:
            dix[0] = -1.0
        if a[3] < b[3]:
            diy[3] = 1.0
        if a[1] > b[1]:
            diy[1] = -1.0
    dinter = dix * iy + diy * ix if overlap else np.zeros(4)
    darea = np.array([-(a[3] - a[1]), -(a[2] - a[0]), a[3] - a[1], a[2] - a[0]])
    dunion = darea - dinter
    dcw = np.zeros(4)
    dch = np.zeros(4)
    if a[2] > b[2]:
        dcw[2] = 1.0
    if a[0] < b[0]:
        dcw[0] = -1.0
    if a[3] > b[3]:
        dch[3] = 1.0
    if a[1] < b[1]:
        dch[1] = -1.0
    dc = dcw * ch + dch * cw

    diou = (dinter * union - inter * dunion) / union ** 2
    dpen = ((dc - dunion) * c - (c - union) * dc) / c ** 2
    dg = diou - dpen
    return float(loss), -dg


LOSSES = {"ce": loss_ce, "bce_dice": loss_bce_dice, "focal": loss_focal}
