"""Saliency maps: Grad-CAM, occlusion sensitivity, entropy uncertainty."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from medrt.errors import ConfigurationError, UnsupportedError, ValidationError
from medrt.imageops import resize_bilinear
from medrt.nn.network import ForwardTrace, NetworkSpec, backward, forward
from medrt.nn.tensor import Tensor

EPS = 1e-7


@dataclass(frozen=True)
class SaliencyMap:
    grid: np.ndarray  # (H, W) float32 in [0, 1], max-normalized
    source: str       # grad_cam | occlusion | uncertainty
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.grid
        if g.ndim != 2:
            raise ValidationError(f"saliency grid must be 2-d, got {g.shape}")
        if g.min() < -1e-6 or g.max() > 1 + 1e-6:
            raise ValidationError("saliency values must lie in [0, 1]")
        if g.max() > 0 and abs(float(g.max()) - 1.0) > 1e-5:
            raise ValidationError("nonzero saliency maps must be max-normalized")


def _normalized(grid: np.ndarray) -> np.ndarray:
    grid = np.maximum(grid.astype(np.float64), 0.0)
    m = grid.max()
    if m > 0:
        grid = grid / m
    return np.clip(grid, 0.0, 1.0).astype(np.float32)


def default_cam_target(net: NetworkSpec) -> int:
    """Last relu that directly follows a conv; else the last conv itself."""
    last_conv = None
    for i in range(len(net.layers) - 1, -1, -1):
        kind = net.layers[i].kind
        if kind == "relu" and i > 0 and net.layers[i - 1].kind in ("conv2d", "conv1x1"):
            return i
        if last_conv is None and kind in ("conv2d", "conv1x1"):
            last_conv = i
    if last_conv is None:
        raise ConfigurationError("network has no conv layer for Grad-CAM")
    return last_conv


def grad_cam(net: NetworkSpec, params, trace: ForwardTrace, class_idx: int,
             target_layer: int | None = None) -> SaliencyMap:
    """Gradient-weighted channel sum at a conv output, ReLU'd + normalized.

    Backpropagates the class logit (pre-softmax output) so that on GAP-head
    classifiers the result equals the closed-form CAM.
    """
    if trace.precision == "int8":
        raise UnsupportedError("grad_cam needs an f32/f64 trace")
    if target_layer is None:
        target_layer = default_cam_target(net)
    if trace.outputs[target_layer].ndim != 4:
        raise ConfigurationError(f"layer {target_layer} is not a spatial map")

    start = len(net.layers) - 1
    if net.layers[start].kind == "softmax":
        start -= 1
    logits = trace.outputs[start]
    onehot = np.zeros_like(logits)
    onehot[:, class_idx] = 1.0
    _, _, act_grads = backward(net, params, trace, Tensor(onehot),
                               start_layer=start, return_act_grads=True)
    acts = trace.outputs[target_layer]
    grads = act_grads[target_layer]
    weights = grads.mean(axis=(2, 3))  # (N, C)
    cam = np.maximum((weights[:, :, None, None] * acts).sum(axis=1), 0.0)[0]
    h, w = trace.input.shape[2], trace.input.shape[3]
    cam = resize_bilinear(cam, h, w)
    return SaliencyMap(grid=_normalized(cam), source="grad_cam",
                       meta={"class_idx": int(class_idx),
                             "target_layer": int(target_layer)})


def occlusion_map(net: NetworkSpec, params, image: Tensor, class_idx: int,
                  patch_size: int = 8, stride: int = 4,
                  precision: str = "f32") -> SaliencyMap:
    """Mean-intensity patch sweep; map = max(0, p_base - p_occluded)."""
    img = image.data
    if img.ndim == 3:
        img = img[None]
    h, w = img.shape[2], img.shape[3]
    if patch_size > min(h, w):
        raise ConfigurationError(f"patch {patch_size} larger than image {h}x{w}")
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")

    base_out, _ = forward(net, params, Tensor(img.astype(np.float32)), precision)
    p_base = float(base_out.data[0, class_idx])
    fill = float(img.mean())

    positions = [(y, x) for y in range(0, h, stride) for x in range(0, w, stride)]
    total = np.zeros((h, w), dtype=np.float64)
    cover = np.zeros((h, w), dtype=np.float64)
    chunk = 32
    for c0 in range(0, len(positions), chunk):
        group = positions[c0:c0 + chunk]
        batch = np.repeat(img, len(group), axis=0).astype(np.float32)
        for bi, (y, x) in enumerate(group):
            batch[bi, :, y:min(y + patch_size, h), x:min(x + patch_size, w)] = fill
        out, _ = forward(net, params, Tensor(batch), precision)
        for bi, (y, x) in enumerate(group):
            delta = max(0.0, p_base - float(out.data[bi, class_idx]))
            ys, xs = slice(y, min(y + patch_size, h)), slice(x, min(x + patch_size, w))
            total[ys, xs] += delta
            cover[ys, xs] += 1.0
    grid = total / np.maximum(cover, 1.0)  # mean over covering patches
    return SaliencyMap(grid=_normalized(grid), source="occlusion",
                       meta={"class_idx": int(class_idx), "patch": patch_size,
                             "stride": stride, "evaluations": len(positions)})


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """H(p)/ln 2, exactly 0 at p in {0, 1}."""
    p = np.asarray(p, dtype=np.float64)
    pc = np.clip(p, EPS, 1 - EPS)
    h = -(pc * np.log(pc) + (1 - pc) * np.log(1 - pc)) / np.log(2.0)
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def uncertainty_map(per_pixel_probs: np.ndarray) -> SaliencyMap:
    probs = np.asarray(per_pixel_probs, dtype=np.float64)
    if probs.min() < 0 or probs.max() > 1:
        raise ValidationError("probabilities must lie in [0, 1]")
    h = binary_entropy(probs)
    return SaliencyMap(grid=_normalized(h), source="uncertainty",
                       meta={"mean_entropy": float(h.mean())})


def confidence_gate(result: dict, tau_conf: float = 0.9,
                    entropy_gate: float = 0.5) -> dict:
    """Marks a result flagged-for-review on low confidence / high entropy."""
    out = dict(result)
    reasons = []
    top = out.get("top_prob")
    if top is not None and top < tau_conf:
        reasons.append(f"top probability {top:.4f} < {tau_conf}")
    mask_probs = out.get("mask_probs")
    if mask_probs is not None:
        mean_h = float(binary_entropy(np.asarray(mask_probs)).mean())
        out["mean_mask_entropy"] = mean_h
        if mean_h > entropy_gate:
            reasons.append(f"mean mask entropy {mean_h:.4f} > {entropy_gate}")
    out["flagged_for_review"] = bool(reasons)
    out["flag_reasons"] = reasons
    return out
