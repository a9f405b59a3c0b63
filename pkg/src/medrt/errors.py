"""Shared exception types.

Every failure surfaced by the package is a subclass of MedRTError so callers
can catch one base type; finer classes exist where a caller is expected to
discriminate (parser errors carry offsets, overload rejections carry depth).
"""


class MedRTError(Exception):
    pass


class DimensionError(MedRTError, ValueError):
    """Tensor/mask shapes incompatible with the requested operation."""


class GeometryError(MedRTError, ValueError):
    """Convolution geometry does not produce an integral output size."""


class ConfigurationError(MedRTError, ValueError):
    """Invalid option combination (precision mismatch, bad ranges, ...)."""


class UnsupportedError(MedRTError, ValueError):
    """Valid input asking for something outside the implemented subset."""


class ValidationError(MedRTError, ValueError):
    """Structured value violates its invariants."""


class ParseError(MedRTError, ValueError):
    """Malformed serialized payload."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class FormatError(ParseError):
    """Magic bytes / container framing wrong."""


class TruncationError(ParseError):
    """Input ended before a declared length was satisfied."""


class IntegrityError(ParseError):
    """Lengths parsed fine but contradict each other."""


class EstimationError(MedRTError, ValueError):
    """Cost model asked about a layer kind it cannot price."""


class UndefinedMetricError(MedRTError, ValueError):
    """Metric undefined for this input (e.g. AUC with one class)."""


class TrainingError(MedRTError, RuntimeError):
    """Training diverged; carries the last finite checkpoint."""

    def __init__(self, message: str, checkpoint=None, history=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.history = history


class OverloadError(MedRTError, RuntimeError):
    """Job rejected by a full queue under the shed policy."""

    def __init__(self, message: str, queue_depth: int = 0):
        super().__init__(message)
        self.queue_depth = queue_depth


class StorageError(MedRTError, OSError):
    """Persistence layer failed; the in-memory result is still valid."""
