"""Exceptions shared across the package."""


class DataError(Exception):
    """Base class for problems with on-disk input data."""


class FormatError(DataError):
    """Input does not follow the neutral subject layout (missing/bad manifest)."""


class CorruptionError(DataError):
    """Input follows the layout but its contents are inconsistent (truncation, length mismatch)."""


class ValidationError(DataError):
    """Decoded values violate a documented invariant (e.g. label outside 0..7)."""
