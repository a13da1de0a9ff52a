"""Exception taxonomy shared across the package.

The CLI maps these onto its exit codes; library code raises them directly.
"""


class KnowdiffError(Exception):
    """Base class for all package errors."""


class DegenerateTrajectoryError(KnowdiffError, ValueError):
    """Trajectory too short (or otherwise degenerate) for the requested operation."""


class ShapeError(KnowdiffError, ValueError):
    """Array arguments do not have the required/consistent shapes."""


class NumericError(KnowdiffError, ArithmeticError):
    """Non-finite values encountered in a numeric computation."""


class FileFormatError(KnowdiffError):
    """A serialized artifact could not be decoded."""


class VersionError(FileFormatError):
    """Format version of a file does not match what this build reads."""


class ChecksumError(FileFormatError):
    """Payload checksum does not match the trailer."""


class TruncatedFileError(FileFormatError):
    """File ends before the declared payload/trailer."""


class LibraryLookupError(KnowdiffError, LookupError):
    """Prior library cannot serve the requested meta-action."""


class ConfigError(KnowdiffError):
    """Invalid or incomplete configuration (missing API key, unknown kind, ...)."""


class EmptyDataError(KnowdiffError):
    """An operation received no usable input data."""


class IncompatibleDataError(KnowdiffError):
    """Inputs that must share a grid (dt, horizon) do not."""


class MetricError(KnowdiffError, ValueError):
    """A metric is undefined for the given inputs (e.g. empty sample set)."""
