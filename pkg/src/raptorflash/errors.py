"""Exception types shared across the codec modules."""


class CodecError(Exception):
    """Base class for every error raised by this package."""


class ConstructionError(CodecError):
    """A code, field or layout could not be built from the given parameters."""


class SingularError(CodecError):
    """Linear system has rank below its column count."""


class InconsistentError(CodecError):
    """Linear system has full column rank but contradictory right-hand side."""


class NotPrimitive(ConstructionError):
    pass


class InvalidParams(ConstructionError):
    pass


class SingularPrecode(ConstructionError):
    pass


class InvalidLayout(ConstructionError):
    pass


class LengthMismatch(CodecError, ValueError):
    pass


class WordSizeMismatch(LengthMismatch):
    pass


class SizeMismatch(LengthMismatch):
    pass


class IndexOutOfRange(CodecError, IndexError):
    pass


class DecodeFailure(CodecError):
    """Raptor decoding could not recover the erased symbols."""


class RecoveryFailure(CodecError):
    """Block recovery failed because the outer decode failed."""


class PageFailure(CodecError):
    """Page decoding failed; carries the inner decoder state."""

    def __init__(self, state, raptor_failed=True, message=None):
        self.state = state
        self.raptor_failed = raptor_failed
        super().__init__(message or f"page decode failed ({state})")


class TooLarge(CodecError):
    pass


class ConfigError(CodecError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
