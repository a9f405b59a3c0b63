"""Tag arithmetic and the dictionary for the supported subset."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Tag:
    group: int
    element: int

    def __post_init__(self):
        if not (0 <= self.group <= 0xFFFF and 0 <= self.element <= 0xFFFF):
            raise ValueError(f"tag out of range: {self}")

    def __str__(self):
        return f"({self.group:04X},{self.element:04X})"


MODALITY = Tag(0x0008, 0x0060)
PATIENT_NAME = Tag(0x0010, 0x0010)
PATIENT_ID = Tag(0x0010, 0x0020)
STUDY_ID = Tag(0x0020, 0x0010)
ROWS = Tag(0x0028, 0x0010)
COLUMNS = Tag(0x0028, 0x0011)
BITS_ALLOCATED = Tag(0x0028, 0x0100)
BITS_STORED = Tag(0x0028, 0x0101)
PIXEL_DATA = Tag(0x7FE0, 0x0010)

# VRs with 2-byte lengths in explicit little endian; OB/OW use the
# reserved + 4-byte length form.
SHORT_VRS = {"PN", "LO", "SH", "CS", "US", "UL", "DS", "IS"}
LONG_VRS = {"OB", "OW"}
SUPPORTED_VRS = SHORT_VRS | LONG_VRS

TAG_DICTIONARY: dict[Tag, tuple[str, str]] = {
    MODALITY: ("CS", "Modality"),
    PATIENT_NAME: ("PN", "PatientName"),
    PATIENT_ID: ("LO", "PatientID"),
    STUDY_ID: ("SH", "StudyID"),
    ROWS: ("US", "Rows"),
    COLUMNS: ("US", "Columns"),
    BITS_ALLOCATED: ("US", "BitsAllocated"),
    BITS_STORED: ("US", "BitsStored"),
    PIXEL_DATA: ("OW", "PixelData"),
}

MANDATORY_TAGS = (MODALITY, PATIENT_NAME, PATIENT_ID, ROWS, COLUMNS,
                  BITS_ALLOCATED, PIXEL_DATA)
