"""N-dimensional tensor carrier and affine quantization parameters.

Layout is NCHW row-major everywhere. A Tensor is a thin wrapper over a
C-contiguous numpy array; int8 tensors always travel with the QuantScheme
that maps them back to real values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from medrt.errors import DimensionError, ValidationError

F32 = np.float32
F64 = np.float64
I8 = np.int8

_ALLOWED = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64", np.dtype(np.int8): "i8"}


@dataclass(frozen=True)
class QuantScheme:
    """Affine int8 mapping real = scale * (q - zero_point).

    Per-tensor schemes carry one scale; per-channel schemes carry one scale
    per output channel and a zero zero_point (symmetric weights).
    """

    scale: tuple[float, ...]
    zero_point: int = 0
    granularity: str = "per-tensor"  # or "per-channel"
    bits: int = 8

    def __post_init__(self):
        if self.bits != 8:
            raise ValidationError(f"only 8-bit schemes supported, got {self.bits}")
        if self.granularity not in ("per-tensor", "per-channel"):
            raise ValidationError(f"unknown granularity {self.granularity!r}")
        if self.granularity == "per-tensor" and len(self.scale) != 1:
            raise ValidationError("per-tensor scheme needs exactly one scale")
        if any(s <= 0 for s in self.scale):
            raise ValidationError("scale must be positive")
        if not -128 <= self.zero_point <= 127:
            raise ValidationError(f"zero_point {self.zero_point} outside int8")
        if self.granularity == "per-channel" and self.zero_point != 0:
            raise ValidationError("per-channel schemes are symmetric (zero_point 0)")

    @classmethod
    def per_tensor(cls, scale: float, zero_point: int = 0) -> "QuantScheme":
        return cls(scale=(float(scale),), zero_point=int(zero_point))

    @classmethod
    def per_channel(cls, scales) -> "QuantScheme":
        return cls(scale=tuple(float(s) for s in scales), granularity="per-channel")

    @property
    def scales(self) -> np.ndarray:
        return np.asarray(self.scale, dtype=np.float64)

    def to_json(self) -> dict:
        return {"scale": list(self.scale), "zero_point": self.zero_point,
                "granularity": self.granularity, "bits": self.bits}

    @classmethod
    def from_json(cls, d: dict) -> "QuantScheme":
        return cls(scale=tuple(d["scale"]), zero_point=d["zero_point"],
                   granularity=d["granularity"], bits=d.get("bits", 8))


@dataclass(frozen=True)
class Tensor:
    data: np.ndarray
    quant: QuantScheme | None = field(default=None)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data)
        object.__setattr__(self, "data", arr)
        if arr.dtype not in _ALLOWED:
            raise ValidationError(f"unsupported dtype {arr.dtype}")
        if arr.ndim == 0 or any(d < 1 for d in arr.shape):
            raise DimensionError(f"every dimension must be >= 1, got shape {arr.shape}")
        if arr.dtype == np.int8 and self.quant is None:
            raise ValidationError("int8 tensors require a QuantScheme")
        if arr.dtype != np.int8 and self.quant is not None:
            raise ValidationError("only int8 tensors carry a QuantScheme")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> str:
        return _ALLOWED[self.data.dtype]

    @classmethod
    def f32(cls, data) -> "Tensor":
        return cls(np.asarray(data, dtype=np.float32))

    @classmethod
    def f64(cls, data) -> "Tensor":
        return cls(np.asarray(data, dtype=np.float64))

    @classmethod
    def i8(cls, data, scheme: QuantScheme) -> "Tensor":
        return cls(np.asarray(data, dtype=np.int8), scheme)

    def astype(self, dtype) -> "Tensor":
        if np.dtype(dtype) == np.int8:
            raise ValidationError("use medrt.compress.quantize_tensor for int8 conversion")
        return Tensor(self.data.astype(dtype))

    def tobytes(self) -> bytes:
        return self.data.tobytes()
