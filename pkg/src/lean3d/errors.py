"""Exception hierarchy shared across the codec."""


class Lean3dError(Exception):
    """Base class for all codec errors."""


class ParameterError(Lean3dError, ValueError):
    """Invalid parameter or misuse of an API (maps to CLI exit 1)."""


class InputError(Lean3dError, ValueError):
    """Invalid input values, e.g. NaN/Inf coordinates (CLI exit 2)."""


class FormatError(Lean3dError, ValueError):
    """Malformed file or packet bytes (CLI exit 2).

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class CorruptStreamError(FormatError):
    """A substream is truncated or internally inconsistent."""


class IntegrityError(Lean3dError):
    """Decode-integrity failure: the stream decoded but the result is
    inconsistent (wrong model, tampered payload, ...). CLI exit 3."""
