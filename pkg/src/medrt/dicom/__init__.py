from medrt.dicom.tags import (BITS_ALLOCATED, BITS_STORED, COLUMNS, MANDATORY_TAGS,
                              MODALITY, PATIENT_ID, PATIENT_NAME, PIXEL_DATA, ROWS,
                              STUDY_ID, SUPPORTED_VRS, TAG_DICTIONARY, Tag)
from medrt.dicom.codec import DicomObject, build_phantom_dicom, parse, write
from medrt.dicom.deident import deidentify, pseudonym
from medrt.dicom.imaging import to_image
from medrt.dicom.fhir import build_result, canonical_json

__all__ = [
    "Tag", "TAG_DICTIONARY", "SUPPORTED_VRS", "MANDATORY_TAGS", "MODALITY",
    "PATIENT_NAME", "PATIENT_ID", "STUDY_ID", "ROWS", "COLUMNS", "BITS_ALLOCATED",
    "BITS_STORED", "PIXEL_DATA", "DicomObject", "parse", "write",
    "build_phantom_dicom", "deidentify", "pseudonym", "to_image", "build_result",
    "canonical_json",
]
