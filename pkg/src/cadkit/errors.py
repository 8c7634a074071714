"""Exception types shared across the toolkit.

Two broad families matter to callers: :class:`DataError` (bad inputs,
bad files, mismatched schemas) and :class:`TrainingError` (degenerate or
failed optimization). The CLI maps them to exit codes 2 and 3.
"""


class CadkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(CadkitError):
    """Invalid input data, file format, or schema mismatch."""


class EmptyInputError(DataError):
    """A zero-sized image or empty collection where content is required."""


class EmptyGlcmError(DataError):
    """ROI/offset combination yields no valid co-occurrence pairs."""


class DegenerateRegionError(DataError):
    """Region too small or empty for the requested geometry computation."""


class DimensionMismatchError(DataError):
    """Feature vector length or layer sizes do not line up."""


class FormatError(DataError):
    """Unreadable or unsupported image file."""


class ParseError(DataError):
    """Malformed text document; carries line/field context when known."""

    def __init__(self, message, line=None, field=None):
        ctx = []
        if line is not None:
            ctx.append(f"line {line}")
        if field is not None:
            ctx.append(f"field {field!r}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
        self.line = line
        self.field = field


class UnsupportedVersionError(DataError):
    """Model file written with an unknown format version."""


class StratificationError(DataError):
    """A class has too few rows to stratify a split."""


class TrainingError(CadkitError):
    """Optimization cannot proceed (e.g. single-class training data)."""
