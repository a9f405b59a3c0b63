"""Confusion-count metrics and AUC-ROC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from medrt.errors import UndefinedMetricError, ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValidationError("confusion counts must be non-negative")


def prf1(c: ConfusionCounts) -> dict:
    """Accuracy/precision/recall/F1; zero denominators give 0.0 + a flag."""
    total = c.tp + c.fp + c.tn + c.fn
    if total == 0:
        raise ValidationError("empty confusion counts")
    degenerate = False

    def safe(num, den):
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return num / den

    precision = safe(c.tp, c.tp + c.fp)
    recall = safe(c.tp, c.tp + c.fn)
    f1 = safe(2 * precision * recall, precision + recall)
    return {"accuracy": (c.tp + c.tn) / total, "precision": precision,
            "recall": recall, "f1": f1, "degenerate": degenerate}


def confusion_from_predictions(pred_labels, true_labels, positive=1) -> ConfusionCounts:
    pred = np.asarray(pred_labels) == positive
    true = np.asarray(true_labels) == positive
    return ConfusionCounts(tp=int((pred & true).sum()), fp=int((pred & ~true).sum()),
                           tn=int((~pred & ~true).sum()), fn=int((~pred & true).sum()))


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie), via a rank sweep."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be equal-length vectors")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[pos].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
