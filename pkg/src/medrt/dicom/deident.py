"""Salted-pseudonym de-identification.

PatientName and PatientID become "ANON-" + first 8 hex chars of
SHA-256(salt || original value): deterministic per (value, salt) so
longitudinal linkage survives, irreversible without the salt.
"""

from __future__ import annotations

import hashlib

from medrt.errors import ConfigurationError
from medrt.dicom.codec import DicomObject
from medrt.dicom.tags import PATIENT_ID, PATIENT_NAME


def pseudonym(value: str, salt: str) -> str:
    digest = hashlib.sha256((salt + value).encode("utf-8")).hexdigest()
    return "ANON-" + digest[:8]


def deidentify(obj: DicomObject, salt: str) -> DicomObject:
    if not salt:
        raise ConfigurationError("de-identification requires a non-empty salt")
    obj.validate()
    out = DicomObject(elements=dict(obj.elements))
    out.set_text(PATIENT_NAME, "PN", pseudonym(obj.text(PATIENT_NAME), salt))
    out.set_text(PATIENT_ID, "LO", pseudonym(obj.text(PATIENT_ID), salt))
    return out
