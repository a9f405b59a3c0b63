"""Pixel extraction: ints -> f32, optional resize, zero-mean/unit-variance."""

from __future__ import annotations

import numpy as np

from medrt.errors import UnsupportedError
from medrt.imageops import normalize, resize_bilinear
from medrt.dicom.codec import DicomObject
from medrt.nn.tensor import Tensor


def to_image(obj: DicomObject, model_size: int = 64) -> Tensor:
    """Returns a (1, model_size, model_size) f32 tensor, normalized."""
    obj.validate()
    bits = obj.bits_allocated
    if bits == 16:
        arr = np.frombuffer(obj.pixel_bytes, dtype="<u2")
    elif bits == 8:
        arr = np.frombuffer(obj.pixel_bytes, dtype=np.uint8)
    else:
        raise UnsupportedError(f"bits allocated {bits} unsupported")
    img = arr.reshape(obj.rows, obj.columns).astype(np.float32)
    if (obj.rows, obj.columns) != (model_size, model_size):
        img = resize_bilinear(img, model_size, model_size)
    return Tensor(normalize(img)[None])
