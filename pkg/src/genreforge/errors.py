"""Exception taxonomy shared by all genreforge modules.

Exit-code contract for the CLI: 0 success, 1 user/config error,
2 data error (corrupt or mismatched inputs), 3 internal invariant violation.
"""


class GenreForgeError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(GenreForgeError):
    """Bad configuration or command-line usage."""

    exit_code = 1


class InvalidFractions(ConfigError):
    """Split fractions are not positive or do not sum to 1."""


class DataError(GenreForgeError):
    """Corrupt, missing, or incompatible input data."""

    exit_code = 2


class CorruptedFile(DataError):
    """WAV container damaged: truncated header, chunk size mismatch, or
    unsupported codec."""


class IoError(DataError):
    """File could not be read or written."""


class EmptyDataset(DataError):
    """No genre directory yielded any decodable file."""


class CacheMismatch(DataError):
    """Feature cache dimensions do not fit the selected model."""


class SchemaError(DataError):
    """A report or manifest file is malformed or missing."""


class InvalidParams(GenreForgeError):
    """DSP parameters out of their valid range."""

    exit_code = 1


class ShapeMismatch(GenreForgeError):
    """Tensor shapes incompatible with the requested operation."""


class DataShapeMismatch(ShapeMismatch):
    """Training data does not match the model input contract."""

    exit_code = 2


class EmptyInput(ShapeMismatch):
    """A metric was asked for on zero samples."""


class LengthMismatch(ShapeMismatch):
    """Parallel series disagree in length."""


class DegenerateRange(GenreForgeError):
    """Normalization attempted on a constant-valued grid."""
