"""Overlay rendering to RGBA rasters.

Compositing rule per layer: out = (1 - a) * base + a * colormap(value) with
per-pixel alpha a = opacity (masks/boxes) or opacity * value (saliency).
Box labels and scores are stamped with a built-in 3x5 bitmap font so output
bytes are fully deterministic.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from medrt.errors import DimensionError, ValidationError
from medrt.explain.colormap import COLORMAPS, apply_colormap
from medrt.explain.png import png_encode
from medrt.explain.saliency import SaliencyMap
from medrt.metrics.detection import BoxPrediction


@dataclass(frozen=True)
class OverlaySpec:
    opacity: float = 0.45
    colormap: str = "hot"
    mask_threshold: float = 0.5
    box_stroke: int = 1

    def __post_init__(self):
        if not 0.0 <= self.opacity <= 1.0:
            raise ValidationError(f"opacity {self.opacity} outside [0, 1]")
        if self.colormap not in COLORMAPS:
            raise ValidationError(f"unknown colormap {self.colormap!r}")
        if self.box_stroke < 1:
            raise ValidationError("box stroke width must be >= 1")

    def to_json(self) -> dict:
        return {"opacity": self.opacity, "colormap": self.colormap,
                "mask_threshold": self.mask_threshold, "box_stroke": self.box_stroke}


@dataclass(frozen=True)
class MaskLayer:
    mask: np.ndarray


@dataclass(frozen=True)
class SaliencyLayer:
    saliency: SaliencyMap


@dataclass(frozen=True)
class BoxLayer:
    boxes: tuple[BoxPrediction, ...]


_FONT = {
    "A": (0b010, 0b101, 0b111, 0b101, 0b101), "B": (0b110, 0b101, 0b110, 0b101, 0b110),
    "C": (0b011, 0b100, 0b100, 0b100, 0b011), "D": (0b110, 0b101, 0b101, 0b101, 0b110),
    "E": (0b111, 0b100, 0b110, 0b100, 0b111), "F": (0b111, 0b100, 0b110, 0b100, 0b100),
    "G": (0b011, 0b100, 0b101, 0b101, 0b011), "H": (0b101, 0b101, 0b111, 0b101, 0b101),
    "I": (0b111, 0b010, 0b010, 0b010, 0b111), "J": (0b001, 0b001, 0b001, 0b101, 0b010),
    "K": (0b101, 0b110, 0b100, 0b110, 0b101), "L": (0b100, 0b100, 0b100, 0b100, 0b111),
    "M": (0b101, 0b111, 0b111, 0b101, 0b101), "N": (0b110, 0b101, 0b101, 0b101, 0b101),
    "O": (0b010, 0b101, 0b101, 0b101, 0b010), "P": (0b110, 0b101, 0b110, 0b100, 0b100),
    "Q": (0b010, 0b101, 0b101, 0b110, 0b011), "R": (0b110, 0b101, 0b110, 0b110, 0b101),
    "S": (0b011, 0b100, 0b010, 0b001, 0b110), "T": (0b111, 0b010, 0b010, 0b010, 0b010),
    "U": (0b101, 0b101, 0b101, 0b101, 0b111), "V": (0b101, 0b101, 0b101, 0b101, 0b010),
    "W": (0b101, 0b101, 0b111, 0b111, 0b101), "X": (0b101, 0b101, 0b010, 0b101, 0b101),
    "Y": (0b101, 0b101, 0b010, 0b010, 0b010), "Z": (0b111, 0b001, 0b010, 0b100, 0b111),
    "0": (0b111, 0b101, 0b101, 0b101, 0b111), "1": (0b010, 0b110, 0b010, 0b010, 0b111),
    "2": (0b111, 0b001, 0b111, 0b100, 0b111), "3": (0b111, 0b001, 0b111, 0b001, 0b111),
    "4": (0b101, 0b101, 0b111, 0b001, 0b001), "5": (0b111, 0b100, 0b111, 0b001, 0b111),
    "6": (0b111, 0b100, 0b111, 0b101, 0b111), "7": (0b111, 0b001, 0b001, 0b010, 0b010),
    "8": (0b111, 0b101, 0b111, 0b101, 0b111), "9": (0b111, 0b101, 0b111, 0b001, 0b111),
    ".": (0b000, 0b000, 0b000, 0b000, 0b010), ":": (0b000, 0b010, 0b000, 0b010, 0b000),
    "%": (0b101, 0b001, 0b010, 0b100, 0b101), "-": (0b000, 0b000, 0b111, 0b000, 0b000),
    "/": (0b001, 0b001, 0b010, 0b100, 0b100), " ": (0, 0, 0, 0, 0),
}


def draw_text(canvas: np.ndarray, x: int, y: int, text: str, color=(255, 255, 255)):
    """Stamp 3x5 glyphs (1px spacing); clipped at canvas edges."""
    h, w = canvas.shape[:2]
    cx = x
    for ch in text.upper():
        glyph = _FONT.get(ch, _FONT[" "])
        for gy, row in enumerate(glyph):
            for gx in range(3):
                if row & (0b100 >> gx):
                    py, px = y + gy, cx + gx
                    if 0 <= py < h and 0 <= px < w:
                        canvas[py, px, :3] = color
                        canvas[py, px, 3] = 255
        cx += 4


def to_gray_rgba(image: np.ndarray) -> np.ndarray:
    """Min-max rescale a float image to an opaque grayscale RGBA canvas."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    if img.ndim != 2:
        raise DimensionError(f"expected (H, W) image, got {img.shape}")
    lo, hi = float(img.min()), float(img.max())
    gray = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    g8 = np.rint(gray * 255).astype(np.uint8)
    out = np.empty(img.shape + (4,), dtype=np.uint8)
    out[..., 0] = out[..., 1] = out[..., 2] = g8
    out[..., 3] = 255
    return out


def _blend(canvas: np.ndarray, alpha: np.ndarray, rgb: np.ndarray) -> None:
    a = alpha[..., None]
    mixed = (1.0 - a) * canvas[..., :3].astype(np.float64) + a * rgb.astype(np.float64)
    canvas[..., :3] = np.rint(mixed).astype(np.uint8)


def _label_color(label: str) -> tuple[int, int, int]:
    idx = 96 + (zlib.crc32(label.encode()) % 128)
    r, g, b = COLORMAPS["viridis"][idx]
    return int(r), int(g), int(b)


def render_overlay(image: np.ndarray, layers, spec: OverlaySpec) -> np.ndarray:
    """Composite layers over the grayscale image; returns (H, W, 4) uint8."""
    canvas = to_gray_rgba(image)
    h, w = canvas.shape[:2]
    for layer in layers:
        if isinstance(layer, MaskLayer):
            mask = np.asarray(layer.mask)
            if mask.shape != (h, w):
                raise DimensionError(f"mask {mask.shape} vs image {(h, w)}")
            on = (mask.astype(np.float64) >= spec.mask_threshold) if mask.dtype.kind == "f" \
                else (mask != 0)
            alpha = on.astype(np.float64) * spec.opacity
            rgb = np.broadcast_to(apply_colormap(np.ones((h, w)), spec.colormap), (h, w, 3))
            _blend(canvas, alpha, rgb)
        elif isinstance(layer, SaliencyLayer):
            grid = layer.saliency.grid
            if grid.shape != (h, w):
                raise DimensionError(f"saliency {grid.shape} vs image {(h, w)}")
            alpha = grid.astype(np.float64) * spec.opacity
            _blend(canvas, alpha, apply_colormap(grid, spec.colormap))
        elif isinstance(layer, BoxLayer):
            for box in layer.boxes:
                _stroke_box(canvas, box, spec)
        else:
            raise ValidationError(f"unknown overlay layer {type(layer).__name__}")
    return canvas


def _stroke_box(canvas: np.ndarray, box: BoxPrediction, spec: OverlaySpec) -> None:
    h, w = canvas.shape[:2]
    x0, y0, x1, y1 = (int(round(v)) for v in box.box)
    x0, x1 = max(0, x0), min(w, x1)
    y0, y1 = max(0, y0), min(h, y1)
    if x1 <= x0 or y1 <= y0:
        return
    color = _label_color(box.label)
    s = spec.box_stroke
    alpha = spec.opacity if spec.opacity > 0 else 0.0
    edge = np.zeros((h, w), dtype=bool)
    edge[y0:min(y0 + s, y1), x0:x1] = True
    edge[max(y1 - s, y0):y1, x0:x1] = True
    edge[y0:y1, x0:min(x0 + s, x1)] = True
    edge[y0:y1, max(x1 - s, x0):x1] = True
    _blend(canvas, edge.astype(np.float64) * alpha,
           np.broadcast_to(np.array(color, dtype=np.uint8), (h, w, 3)))
    if alpha > 0:
        draw_text(canvas, x0, max(0, y0 - 6), f"{box.label} {box.score:.2f}", color)


def side_by_side(left: np.ndarray, right: np.ndarray, gap: int = 2) -> np.ndarray:
    if left.shape[0] != right.shape[0]:
        raise DimensionError("panels must share height")
    h = left.shape[0]
    divider = np.zeros((h, gap, 4), dtype=np.uint8)
    divider[..., 3] = 255
    return np.concatenate([left, divider, right], axis=1)


def render_overlay_png(image, layers, spec: OverlaySpec) -> bytes:
    return png_encode(render_overlay(image, layers, spec))
