from medrt.metrics.segmentation import dice, iou_mask, pixel_accuracy
from medrt.metrics.classification import (ConfusionCounts, auc_roc,
                                          confusion_from_predictions, prf1)
from medrt.metrics.detection import (BoxPrediction, box_iou,
                                     mean_average_precision, nms)
from medrt.metrics.latency import LatencySummary, latency_summary, nearest_rank

__all__ = [
    "dice", "iou_mask", "pixel_accuracy", "ConfusionCounts", "prf1", "auc_roc",
    "confusion_from_predictions", "BoxPrediction", "box_iou", "nms",
    "mean_average_precision", "LatencySummary", "latency_summary", "nearest_rank",
]
