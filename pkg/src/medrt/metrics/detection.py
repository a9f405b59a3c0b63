"""Box detection metrics: IoU, greedy NMS, all-point-interpolated mAP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from medrt.errors import ValidationError


@dataclass(frozen=True)
class BoxPrediction:
    box: tuple[float, float, float, float]  # (x0, y0, x1, y1)
    score: float
    label: str = "lesion"

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise ValidationError(f"degenerate box {self.box}")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]")


def box_iou(a, b) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def nms(preds: list[BoxPrediction], iou_threshold: float) -> list[BoxPrediction]:
    """Greedy suppression; ordering by (score desc, input index asc)."""
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValidationError(f"iou_threshold {iou_threshold} outside [0, 1]")
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    kept: list[int] = []
    for i in order:
        ok = True
        for j in kept:
            if preds[j].label == preds[i].label and \
                    box_iou(preds[i].box, preds[j].box) >= iou_threshold:
                ok = False
                break
        if ok:
            kept.append(i)
    return [preds[i] for i in kept]


def _average_precision(matches: list[tuple[float, bool]], n_gt: int) -> float:
    """matches: (score, is_tp) per prediction; all-point PR interpolation."""
    if n_gt == 0:
        return 1.0 if not matches else 0.0
    if not matches:
        return 0.0
    tps = np.array([1.0 if m else 0.0 for _, m in matches])
    cum_tp = np.cumsum(tps)
    cum_fp = np.cumsum(1.0 - tps)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # precision envelope from the right, integrated over recall steps
    env = precision.copy()
    for i in range(len(env) - 2, -1, -1):
        env[i] = max(env[i], env[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recall, env):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap)


def mean_average_precision(preds_per_image: list[list[BoxPrediction]],
                           gts_per_image: list[list],
                           iou_threshold: float = 0.5) -> float:
    """Greedy score-descending matching to unmatched GT at IoU >= threshold.

    gts_per_image holds (box, label) tuples or bare boxes (default label).
    """
    if len(preds_per_image) != len(gts_per_image):
        raise ValidationError("prediction and ground-truth image counts differ")

    def norm_gt(g):
        if isinstance(g, (tuple, list)) and len(g) == 2 and not np.isscalar(g[0]):
            return tuple(g[0]), g[1]
        return tuple(g), "lesion"

    labels = set()
    gts = []
    for img_gts in gts_per_image:
        rows = [norm_gt(g) for g in img_gts]
        gts.append(rows)
        labels.update(label for _, label in rows)
    for img_preds in preds_per_image:
        labels.update(p.label for p in img_preds)
    if not labels:
        return 1.0  # nothing to detect, nothing predicted

    aps = []
    for label in sorted(labels):
        matches: list[tuple[float, bool]] = []
        n_gt = sum(sum(1 for _, l in rows if l == label) for rows in gts)
        flat = [(p.score, img, i) for img, img_preds in enumerate(preds_per_image)
                for i, p in enumerate(img_preds) if p.label == label]
        flat.sort(key=lambda t: (-t[0], t[1], t[2]))
        used: dict[int, set] = {}
        for score, img, i in flat:
            pred = preds_per_image[img][i]
            best_iou, best_j = 0.0, -1
            for j, (gbox, glabel) in enumerate(gts[img]):
                if glabel != label or j in used.setdefault(img, set()):
                    continue
                v = box_iou(pred.box, gbox)
                if v > best_iou:
                    best_iou, best_j = v, j
            if best_j >= 0 and best_iou >= iou_threshold:
                used[img].add(best_j)
                matches.append((score, True))
            else:
                matches.append((score, False))
        aps.append(_average_precision(matches, n_gt))
    return float(np.mean(aps))
