"""Exception types shared across the package."""


class SaaeError(Exception):
    """Base class for errors raised by this package."""


class DataValidationError(SaaeError, ValueError):
    """Input data violates a documented precondition (non-finite values, bad shapes, bad labels)."""


class DimensionError(SaaeError, ValueError):
    """Array dimensions are inconsistent with the model or guide they are fed to."""


class ArchitectureError(SaaeError, ValueError):
    """A window length cannot survive the convolution/pooling chain."""


class TrainingDivergedError(SaaeError, RuntimeError):
    """A training sub-step produced a non-finite loss; the message names the sub-step."""


class CacheFormatError(SaaeError, ValueError):
    """A window cache or checkpoint file is missing, corrupt, or from an incompatible version."""
