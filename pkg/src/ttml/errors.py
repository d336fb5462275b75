"""Exception hierarchy shared across the package."""


class TTMLError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(TTMLError):
    """Incompatible tensor dimensions or core shapes."""


class DegeneratePointError(TTMLError):
    """A TT lacks full multilinear rank, so its tangent space is undefined."""


class BaseMismatchError(TTMLError):
    """Tangent vectors rooted at different base points were combined."""


class DataError(TTMLError):
    """Bad user-supplied data (CSV parsing, NaN features, missing columns)."""


class ConfigError(TTMLError):
    """Invalid configuration (degenerate grid, bad split fractions, ...)."""


class NumericalError(TTMLError):
    """Non-finite values or other numerical breakdown during optimization."""


class ModelFormatError(TTMLError):
    """Model file is corrupted, truncated, or has an unsupported version."""
