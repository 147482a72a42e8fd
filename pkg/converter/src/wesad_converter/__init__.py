"""Convert WESAD per-subject pickle archives to the neutral subject layout."""

__version__ = "0.1.0"

from .convert import ConvertError, FormatError, convert, convert_all  # noqa: F401
