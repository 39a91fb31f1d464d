"""Exception hierarchy shared across the package.

The CLI maps ValidationError (and subclasses) to exit code 1 and
FormatError/OSError to exit code 2.
"""


class PhasorlocError(Exception):
    """Base class for all package errors."""


class ValidationError(PhasorlocError, ValueError):
    """A configuration value or input violates a documented invariant."""


class ModalityMismatchError(ValidationError):
    """A PSF operation was called with the wrong modality."""


class OutOfRangeError(ValidationError):
    """A value lies outside its documented range (z outside z_range, bad rate, ...)."""


class UndefinedMetricError(PhasorlocError, ValueError):
    """A metric was requested on an empty denominator (no pairs, no counts)."""


class UndefinedDepthError(PhasorlocError):
    """The weighted complex sum over a phase window vanished; depth is undefined."""


class FormatError(PhasorlocError):
    """A file does not conform to one of the on-disk formats.

    Carries enough location information to point at the offending line or
    byte offset.
    """

    def __init__(self, message, *, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        prefix = ": ".join(loc)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class BadMagicError(FormatError):
    """Binary grid file does not start with the expected magic bytes."""


class TruncatedPayloadError(FormatError):
    """Binary payload is shorter than the header-declared size."""


class HeaderMismatchError(FormatError):
    """Text header or per-line field count does not match the format."""
