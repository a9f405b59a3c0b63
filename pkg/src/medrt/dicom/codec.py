"""Strict DICOM-subset parser and writer.

Accepted grammar, exactly: 128-byte preamble, "DICM", then explicit-VR
little-endian data elements with strictly ascending tags. Supported VRs
only; one transfer syntax; no sequences. Every declared length is bounds-
checked before reading so malformed input yields typed errors, never reads
past the buffer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from medrt.errors import (FormatError, IntegrityError, TruncationError,
                          UnsupportedError, ValidationError)
from medrt.dicom.tags import (BITS_ALLOCATED, BITS_STORED, COLUMNS, LONG_VRS,
                              MANDATORY_TAGS, PIXEL_DATA, ROWS, SHORT_VRS,
                              SUPPORTED_VRS, TAG_DICTIONARY, Tag)

PREAMBLE_LEN = 128
MAGIC = b"DICM"


@dataclass
class DicomObject:
    """Ordered tag -> (VR, raw value bytes) map plus pixel metadata views."""
    elements: dict[Tag, tuple[str, bytes]] = field(default_factory=dict)

    # --- typed accessors -----------------------------------------------------

    def us(self, tag: Tag) -> int:
        vr, value = self.elements[tag]
        return struct.unpack("<H", value[:2])[0]

    def text(self, tag: Tag) -> str:
        _, value = self.elements[tag]
        return value.decode("latin-1").rstrip(" \x00")

    @property
    def rows(self) -> int:
        return self.us(ROWS)

    @property
    def columns(self) -> int:
        return self.us(COLUMNS)

    @property
    def bits_allocated(self) -> int:
        return self.us(BITS_ALLOCATED)

    @property
    def pixel_bytes(self) -> bytes:
        return self.elements[PIXEL_DATA][1]

    def set_text(self, tag: Tag, vr: str, value: str) -> None:
        raw = value.encode("latin-1")
        if len(raw) % 2:
            raw += b" "
        self.elements[tag] = (vr, raw)

    def validate(self) -> None:
        prev = None
        for tag, (vr, value) in self.elements.items():
            if vr not in SUPPORTED_VRS:
                raise UnsupportedError(f"VR {vr!r} at {tag} not in supported subset")
            if len(value) % 2:
                raise ValidationError(f"odd value length {len(value)} at {tag}")
            if vr == "US" and len(value) < 2:
                raise ValidationError(f"US value at {tag} must hold a 16-bit word")
            if vr == "UL" and len(value) % 4 != 0:
                raise ValidationError(f"UL value at {tag} must hold 32-bit words")
            if prev is not None and tag <= prev:
                raise ValidationError(f"tags out of order at {tag}")
            prev = tag
        for tag in MANDATORY_TAGS:
            if tag not in self.elements:
                raise ValidationError(f"mandatory tag {tag} missing")
        if self.bits_allocated not in (8, 16):
            raise ValidationError(f"bits allocated must be 8 or 16, "
                                  f"got {self.bits_allocated}")
        expect = self.rows * self.columns * (self.bits_allocated // 8)
        if len(self.pixel_bytes) != expect:
            raise ValidationError(
                f"pixel buffer holds {len(self.pixel_bytes)} bytes, geometry needs {expect}")
        if self.rows < 1 or self.columns < 1:
            raise ValidationError("rows/columns must be >= 1")


def parse(data: bytes) -> DicomObject:
    if len(data) < PREAMBLE_LEN + 4:
        raise TruncationError("file shorter than preamble + magic", offset=len(data))
    if data[PREAMBLE_LEN:PREAMBLE_LEN + 4] != MAGIC:
        raise FormatError("missing DICM magic after 128-byte preamble",
                          offset=PREAMBLE_LEN)
    pos = PREAMBLE_LEN + 4
    obj = DicomObject()
    prev: Tag | None = None
    n = len(data)
    while pos < n:
        if pos + 8 > n:
            raise TruncationError("truncated element header", offset=pos)
        group, element = struct.unpack_from("<HH", data, pos)
        vr = data[pos + 4:pos + 6].decode("ascii", errors="replace")
        tag = Tag(group, element)
        if vr not in SUPPORTED_VRS:
            raise UnsupportedError(f"unsupported VR {vr!r} at {tag} (offset {pos})")
        if vr in LONG_VRS:
            if pos + 12 > n:
                raise TruncationError(f"truncated long header at {tag}", offset=pos)
            reserved, length = struct.unpack_from("<HI", data, pos + 6)
            if reserved != 0:
                raise IntegrityError(f"nonzero reserved field at {tag}", offset=pos + 6)
            value_start = pos + 12
        else:
            (length,) = struct.unpack_from("<H", data, pos + 6)
            value_start = pos + 8
        if length % 2:
            raise IntegrityError(f"odd value length {length} at {tag}",
                                 offset=value_start - 2)
        if value_start + length > n:
            raise TruncationError(
                f"element {tag} declares {length} bytes past end of file",
                offset=value_start)
        if prev is not None and tag <= prev:
            raise IntegrityError(f"tag {tag} not ascending after {prev}", offset=pos)
        prev = tag
        obj.elements[tag] = (vr, data[value_start:value_start + length])
        pos = value_start + length
    try:
        obj.validate()
    except UnsupportedError:
        raise
    except ValidationError as e:
        raise IntegrityError(str(e)) from None
    return obj


def write(obj: DicomObject) -> bytes:
    obj_sorted = DicomObject(elements=dict(sorted(obj.elements.items())))
    obj_sorted.validate()
    out = bytearray(PREAMBLE_LEN)
    out += MAGIC
    for tag, (vr, value) in obj_sorted.elements.items():
        out += struct.pack("<HH", tag.group, tag.element)
        out += vr.encode("ascii")
        if vr in LONG_VRS:
            out += struct.pack("<HI", 0, len(value))
        else:
            if len(value) > 0xFFFF:
                raise ValidationError(f"{vr} value at {tag} exceeds 16-bit length")
            out += struct.pack("<H", len(value))
        out += value
    return bytes(out)


def build_phantom_dicom(image: np.ndarray, patient_name: str, patient_id: str,
                        study_id: str = "S00000", modality: str = "CT") -> DicomObject:
    """Pack a float intensity image (H, W) into a 16-bit study."""
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValidationError(f"expected (H, W) image, got {arr.shape}")
    pixels = np.clip(np.rint(arr), 0, 65535).astype("<u2")
    obj = DicomObject()
    obj.set_text(Tag(0x0008, 0x0060), "CS", modality)
    obj.set_text(Tag(0x0010, 0x0010), "PN", patient_name)
    obj.set_text(Tag(0x0010, 0x0020), "LO", patient_id)
    obj.set_text(Tag(0x0020, 0x0010), "SH", study_id)
    h, w = arr.shape
    obj.elements[ROWS] = ("US", struct.pack("<H", h))
    obj.elements[COLUMNS] = ("US", struct.pack("<H", w))
    obj.elements[BITS_ALLOCATED] = ("US", struct.pack("<H", 16))
    obj.elements[BITS_STORED] = ("US", struct.pack("<H", 16))
    obj.elements[PIXEL_DATA] = ("OW", pixels.tobytes())
    obj = DicomObject(elements=dict(sorted(obj.elements.items())))
    obj.validate()
    return obj
