"""Minimal deterministic PNG writer: 8-bit RGBA, no interlace, filter 0.

zlib level is pinned so identical pixels always give identical bytes.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from medrt.errors import DimensionError

_ZLIB_LEVEL = 6


def png_encode(rgba: np.ndarray) -> bytes:
    arr = np.asarray(rgba)
    if arr.ndim != 3 or arr.shape[2] != 4 or arr.dtype != np.uint8:
        raise DimensionError(f"expected (H, W, 4) uint8, got {arr.shape} {arr.dtype}")
    h, w, _ = arr.shape

    def chunk(typ: bytes, data: bytes) -> bytes:
        body = typ + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 6, 0, 0, 0)
    raw = b"".join(b"\x00" + arr[y].tobytes() for y in range(h))
    return (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw, _ZLIB_LEVEL))
            + chunk(b"IEND", b""))
