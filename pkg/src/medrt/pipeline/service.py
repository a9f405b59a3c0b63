"""Model bundle: the actual compute each pipeline stage performs.

decode (DICOM parse + pixel extraction), preprocess (resize + normalize +
optional exit head), batched inference (classifier + optional mask model),
and postprocess (boxes, overlays, uncertainty, gating, result assembly).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from medrt.errors import ValidationError
from medrt.dicom.codec import DicomObject, parse
from medrt.dicom.imaging import to_image
from medrt.explain.overlay import (BoxLayer, MaskLayer, OverlaySpec, SaliencyLayer,
                                   render_overlay_png)
from medrt.explain.saliency import binary_entropy, uncertainty_map
from medrt.imageops import normalize, resize_bilinear
from medrt.metrics.detection import BoxPrediction, nms
from medrt.metrics.segmentation import dice as dice_metric
from medrt.nn.network import forward, forward_partial, run_exit_head
from medrt.nn.params import Params
from medrt.nn.tensor import Tensor
from medrt.pipeline.policy import early_exit_decide
from medrt.training.phantoms import connected_components, rle_encode

CLASS_LABELS = ("no-lesion", "lesion")


@dataclass(frozen=True)
class Thresholds:
    confidence: float = 0.5
    nms_iou: float = 0.5
    tau_exit: float = 0.95
    tau_conf: float = 0.7
    entropy_gate: float = 0.6

    def __post_init__(self):
        for name in ("confidence", "nms_iou", "tau_conf", "entropy_gate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} {v} outside [0, 1]")
        if not 0.5 < self.tau_exit <= 1.0:
            raise ValidationError(f"tau_exit {self.tau_exit} outside (0.5, 1]")

    def to_json(self) -> dict:
        return {"confidence": self.confidence, "nms_iou": self.nms_iou,
                "tau_exit": self.tau_exit, "tau_conf": self.tau_conf,
                "entropy_gate": self.entropy_gate}


@dataclass
class Decoded:
    obj: DicomObject
    raw_resized: np.ndarray     # (H, W) f32 intensities at model size
    normalized: Tensor          # (1, H, W)


class ModelBundle:
    """Classifier (+ optional mask model) with runtime thresholds."""

    def __init__(self, classifier: Params, unet: Params | None = None,
                 thresholds: Thresholds | None = None,
                 overlay: OverlaySpec | None = None, image_size: int = 64,
                 use_early_exit: bool = False):
        self.classifier = classifier
        self.unet = unet
        self.thresholds = thresholds or Thresholds()
        self.overlay = overlay or OverlaySpec()
        self.image_size = image_size
        self.use_early_exit = use_early_exit and bool(classifier.net.exits)

    @property
    def precision(self) -> str:
        return self.classifier.precision

    def set_thresholds(self, **changes) -> Thresholds:
        self.thresholds = replace(self.thresholds, **changes)
        return self.thresholds

    # --- stage implementations ------------------------------------------------

    def decode(self, dicom_bytes: bytes) -> Decoded:
        obj = parse(dicom_bytes)
        bits = obj.bits_allocated
        dtype = "<u2" if bits == 16 else np.uint8
        raw = np.frombuffer(obj.pixel_bytes, dtype=dtype).reshape(
            obj.rows, obj.columns).astype(np.float32)
        if raw.shape != (self.image_size, self.image_size):
            raw = resize_bilinear(raw, self.image_size, self.image_size)
        return Decoded(obj=obj, raw_resized=raw, normalized=Tensor(normalize(raw)[None]))

    def exit_check(self, x: Tensor):
        """(should_exit, probs) from the early-exit head; (False, None) if unused."""
        if not self.use_early_exit:
            return False, None
        net = self.classifier.net
        attach = net.exits[0].attach_after
        trace = forward_partial(net, self.classifier, x, attach, self.precision)
        probs = run_exit_head(net, self.classifier, trace).data[0]
        should, _label, _conf = early_exit_decide(probs, self.thresholds.tau_exit)
        return should, probs

    def infer(self, batch: Tensor) -> list[dict]:
        """Full-network outputs for a batch of normalized images."""
        probs, _ = forward(self.classifier.net, self.classifier, batch, self.precision)
        masks = None
        if self.unet is not None:
            mask_out, _ = forward(self.unet.net, self.unet, batch, self.unet.precision)
            masks = mask_out.data[:, 0]
        out = []
        for i in range(probs.shape[0]):
            out.append({"probs": probs.data[i],
                        "mask_probs": None if masks is None else masks[i]})
        return out

    # --- postprocess ------------------------------------------------------------

    def detect_boxes(self, mask_probs: np.ndarray) -> list[BoxPrediction]:
        binary = (mask_probs >= 0.5).astype(np.uint8)
        preds = []
        for comp in connected_components(binary):
            ys, xs = np.nonzero(comp)
            score = float(mask_probs[comp].mean())
            preds.append(BoxPrediction(
                (float(xs.min()), float(ys.min()), float(xs.max()) + 1.0,
                 float(ys.max()) + 1.0), min(max(score, 0.0), 1.0), "lesion"))
        kept = nms(preds, self.thresholds.nms_iou)
        return [p for p in kept if p.score >= self.thresholds.confidence]

    def postprocess(self, decoded_raw: np.ndarray, output: dict,
                    early_probs=None, reference_mask=None) -> dict:
        """Findings, flags, overlay PNG, and optional mask artifacts."""
        th = self.thresholds
        early = early_probs is not None
        probs = np.asarray(early_probs if early else output["probs"], dtype=np.float64)
        top = int(probs.argmax())
        findings = [{"label": CLASS_LABELS[top], "score": float(probs[top]),
                     "kind": "classification"}]
        mask_probs = None if early else output.get("mask_probs")
        boxes: list[BoxPrediction] = []
        mask_rle = None
        dice_ref = None
        layers = []
        if mask_probs is not None:
            boxes = self.detect_boxes(mask_probs)
            binary = (mask_probs >= th.confidence).astype(np.uint8)
            mask_rle = rle_encode(binary)
            layers.append(MaskLayer(binary))
            layers.append(SaliencyLayer(uncertainty_map(mask_probs)))
            if reference_mask is not None:
                dice_ref = dice_metric(binary, reference_mask)
            for b in boxes:
                findings.append({"label": b.label, "score": b.score,
                                 "box": list(b.box), "kind": "detection"})
        if boxes:
            layers.append(BoxLayer(tuple(boxes)))
        overlay_png = render_overlay_png(decoded_raw, layers, self.overlay)
        base_png = render_overlay_png(decoded_raw, [], self.overlay)
        saliency_png = None
        if mask_probs is not None:
            grid = uncertainty_map(mask_probs).grid
            g8 = np.rint(grid * 255).astype(np.uint8)
            rgba = np.stack([g8, g8, g8, np.full_like(g8, 255)], axis=-1)
            from medrt.explain.png import png_encode
            saliency_png = png_encode(rgba)

        gate = {"top_prob": float(probs[top])}
        if mask_probs is not None:
            gate["mask_probs"] = mask_probs
        flagged = False
        if gate["top_prob"] < th.tau_conf:
            flagged = True
        if mask_probs is not None and \
                float(binary_entropy(mask_probs).mean()) > th.entropy_gate:
            flagged = True
        return {"findings": findings, "early_exit": early,
                "flagged_for_review": flagged, "label": CLASS_LABELS[top],
                "score": float(probs[top]), "boxes": boxes, "mask_rle": mask_rle,
                "mask_shape": None if mask_probs is None else list(mask_probs.shape),
                "dice_vs_reference": dice_ref, "overlay_png": overlay_png,
                "base_png": base_png, "saliency_png": saliency_png,
                "probs": [float(v) for v in probs]}

    def task_name(self) -> str:
        return "segmentation" if self.unet is not None else "classification"
