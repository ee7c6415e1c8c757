"""Exception types shared across the package."""


class CardioseqError(Exception):
    """Base class for all package-specific errors."""


class SequenceFormatError(CardioseqError):
    """A sequence directory, frame file, or table violates the on-disk format."""


class AttributeExtractionError(CardioseqError):
    """A label map does not support shape-attribute extraction."""


class DegenerateBaseError(AttributeExtractionError):
    """The left ventricle has no opening toward background (no valve plane)."""


class DegenerateStatsError(CardioseqError):
    """Normalization statistics are unusable (max == min, or attribute missing)."""


class CodecError(CardioseqError):
    """Shape codec encode/decode failed (bad geometry, unreachable target area...)."""


class OptimizationError(CardioseqError):
    """The inner smoothing solver failed to make progress."""


class ConfigError(CardioseqError):
    """Invalid configuration or missing auxiliary file."""
