"""Exception hierarchy shared across the package."""


class UTRNetError(Exception):
    """Base class for all package errors."""


class DimensionError(UTRNetError, ValueError):
    """Tensor shapes are incompatible with the requested operation."""


class ContractError(UTRNetError, ValueError):
    """A documented precondition was violated by the caller."""


class NumericError(UTRNetError, FloatingPointError):
    """A computation produced NaN or infinity."""


class DataValidationError(UTRNetError, ValueError):
    """A dataset, manifest or charset failed validation."""


class CheckpointError(UTRNetError, ValueError):
    """A checkpoint file is malformed or incompatible."""
