"""Exception and warning types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class TraceError(ValueError):
    """Malformed or insufficient channel trace."""


class CapacityError(RuntimeError):
    """Problem does not fit the requested solver or chip."""


class EmbeddingError(CapacityError):
    """Clique embedding cannot be placed on the hardware graph."""


class SampleError(ValueError):
    """Physical sample is missing chain nodes."""


class DecodeError(ValueError):
    """A classical decoder cannot run on this channel (e.g. rank deficient)."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class RangeWarning(UserWarning):
    """Embedded coefficients exceeded the hardware range and were clamped."""
