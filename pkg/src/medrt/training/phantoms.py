"""Deterministic synthetic phantom studies.

A phantom is a noisy grayscale background with zero to three bright
elliptical lesions. Every sample carries its binary lesion mask and tight
bounding boxes around each connected mask component, so classification,
segmentation, and detection tasks all have exact ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from medrt.errors import ConfigurationError
from medrt.nn.tensor import Tensor

LESION = "lesion"
NO_LESION = "no-lesion"


@dataclass(frozen=True)
class DatasetSpec:
    seed: int = 0
    count: int = 100
    image_size: int = 64
    lesion_prob: float = 0.5
    radius_range: tuple[float, float] = (4.0, 9.0)
    noise_amplitude: float = 0.04
    intensity_range: tuple[float, float] = (0.0, 4000.0)

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError("count must be >= 1")
        if self.image_size < 16:
            raise ConfigurationError(f"image_size must be >= 16, got {self.image_size}")
        if not 0 <= self.lesion_prob <= 1:
            raise ConfigurationError("lesion probability must be in [0, 1]")

    def to_json(self) -> dict:
        return {"seed": self.seed, "count": self.count, "image_size": self.image_size,
                "lesion_prob": self.lesion_prob, "radius_range": list(self.radius_range),
                "noise_amplitude": self.noise_amplitude,
                "intensity_range": list(self.intensity_range)}

    @classmethod
    def from_json(cls, d: dict) -> "DatasetSpec":
        return cls(seed=d.get("seed", 0), count=d.get("count", 100),
                   image_size=d.get("image_size", 64),
                   lesion_prob=d.get("lesion_prob", 0.5),
                   radius_range=tuple(d.get("radius_range", (4.0, 9.0))),
                   noise_amplitude=d.get("noise_amplitude", 0.04),
                   intensity_range=tuple(d.get("intensity_range", (0.0, 4000.0))))


@dataclass
class PhantomSample:
    sample_id: str
    image: Tensor              # (1, H, W) f32, raw 16-bit-range intensities
    class_label: str
    mask: np.ndarray           # (H, W) uint8
    boxes: list[tuple[int, int, int, int]]  # (x0, y0, x1, y1), exclusive max

    def __post_init__(self):
        has_mask = bool(self.mask.any())
        if has_mask != (self.class_label == LESION):
            raise ConfigurationError("mask nonzero iff label is lesion")


def connected_components(mask: np.ndarray) -> list[np.ndarray]:
    """4-connected components of a binary mask, as boolean arrays."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = []
    on = mask != 0
    for sy in range(h):
        for sx in range(w):
            if not on[sy, sx] or seen[sy, sx]:
                continue
            stack = [(sy, sx)]
            seen[sy, sx] = True
            comp = np.zeros((h, w), dtype=bool)
            while stack:
                y, x = stack.pop()
                comp[y, x] = True
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and on[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            comps.append(comp)
    return comps


def boxes_from_mask(mask: np.ndarray) -> list[tuple[int, int, int, int]]:
    """Tight (x0, y0, x1, y1) box around each connected component."""
    out = []
    for comp in connected_components(mask):
        ys, xs = np.nonzero(comp)
        out.append((int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1))
    return out


def _ellipse_mask(size: int, cx, cy, a, b, theta) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    dx = xx - cx
    dy = yy - cy
    ct, st = np.cos(theta), np.sin(theta)
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _one_phantom(spec: DatasetSpec, index: int) -> PhantomSample:
    rng = np.random.default_rng([spec.seed, index])
    size = spec.image_size
    lo, hi = spec.intensity_range
    span = hi - lo

    # the lesion coin flip is deliberately the first draw so tests can
    # re-derive expected label counts independently
    is_lesion = bool(rng.random() < spec.lesion_prob)

    # smooth anatomy-ish background: offset + gradient + soft blobs + noise
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    base = lo + span * (0.18 + 0.05 * rng.random())
    gx, gy = rng.uniform(-0.04, 0.04, 2)
    img = base + span * (gx * xx / size + gy * yy / size)
    for _ in range(rng.integers(1, 4)):
        bx, by = rng.uniform(0, size, 2)
        br = rng.uniform(size / 4, size)
        img += span * rng.uniform(-0.05, 0.05) * np.exp(
            -((xx - bx) ** 2 + (yy - by) ** 2) / (2 * br ** 2))
    img += rng.normal(0.0, spec.noise_amplitude * span, (size, size))

    mask = np.zeros((size, size), dtype=np.uint8)
    if is_lesion:
        for _ in range(int(rng.integers(1, 4))):
            a = rng.uniform(*spec.radius_range)
            b = rng.uniform(*spec.radius_range)
            margin = max(a, b) + 2
            cx = rng.uniform(margin, size - margin)
            cy = rng.uniform(margin, size - margin)
            theta = rng.uniform(0, np.pi)
            ellipse = _ellipse_mask(size, cx, cy, a, b, theta)
            boost = span * rng.uniform(0.28, 0.5)
            falloff = np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2)
                               / (2 * (max(a, b) * 0.9) ** 2)))
            img += np.where(ellipse, boost * (0.6 + 0.4 * falloff), 0.0)
            mask |= ellipse.astype(np.uint8)

    img = np.clip(img, lo, hi).astype(np.float32)
    label = LESION if is_lesion else NO_LESION
    return PhantomSample(sample_id=f"phantom-{spec.seed}-{index:05d}",
                         image=Tensor(img[None]), class_label=label,
                         mask=mask, boxes=boxes_from_mask(mask))


def generate_phantoms(spec: DatasetSpec) -> list[PhantomSample]:
    """Deterministic in spec.seed; sample i only depends on (seed, i)."""
    return [_one_phantom(spec, i) for i in range(spec.count)]


# --- mask run-length encoding for manifests --------------------------------

def rle_encode(mask: np.ndarray) -> str:
    """Row-major alternating run lengths, zeros first: "3,5,2,..."."""
    flat = (np.asarray(mask).ravel() != 0).astype(np.int8)
    runs = []
    current = 0
    length = 0
    for v in flat:
        if v == current:
            length += 1
        else:
            runs.append(length)
            current = v
            length = 1
    runs.append(length)
    return ",".join(str(r) for r in runs)


def rle_decode(text: str, shape: tuple[int, int]) -> np.ndarray:
    total = shape[0] * shape[1]
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    val = 0
    for part in text.split(","):
        n = int(part)
        if val:
            flat[pos:pos + n] = 1
        pos += n
        val ^= 1
    if pos != total:
        raise ConfigurationError(f"RLE covers {pos} pixels, mask needs {total}")
    return flat.reshape(shape)


def manifest_entry(sample: PhantomSample) -> dict:
    return {"sample_id": sample.sample_id, "label": sample.class_label,
            "mask_rle": rle_encode(sample.mask),
            "shape": list(sample.mask.shape),
            "boxes": [list(b) for b in sample.boxes]}


def write_manifest(samples, path) -> None:
    rows = [manifest_entry(s) for s in samples]
    with open(path, "w") as f:
        json.dump({"samples": rows}, f, sort_keys=True, indent=1)
