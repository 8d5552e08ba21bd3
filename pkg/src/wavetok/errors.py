"""Exception types shared across the package."""


class WavetokError(Exception):
    """Base class for all library errors."""


class DimensionError(WavetokError, ValueError):
    """Operand shapes are inconsistent (mismatched planes, bad inner dims, ...)."""


class ConfigurationError(WavetokError, ValueError):
    """A configuration is invalid for the requested operation (divisibility, ranges)."""


class SequencingError(WavetokError, ValueError):
    """Progressive steps were issued out of group order."""


class NumericError(WavetokError, ArithmeticError):
    """A numerically undefined request (zero-norm vector, fully masked softmax row)."""


class ManifestError(WavetokError, ValueError):
    """A tensor manifest or its blob is malformed or inconsistent."""


class PpmError(WavetokError, ValueError):
    """A PPM file failed to parse. Carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
