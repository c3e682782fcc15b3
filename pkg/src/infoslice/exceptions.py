"""Exception types shared across the package."""


class InfosliceError(Exception):
    """Base class for all package errors."""


class InvalidDataError(InfosliceError, ValueError):
    """Input contains non-finite values or a cell cannot be parsed."""


class InsufficientDataError(InfosliceError, ValueError):
    """Too few samples for the requested operation."""


class SchemaError(InfosliceError, ValueError):
    """CSV schema is missing, malformed, or inconsistent with the file."""


class TrainingDivergedError(InfosliceError, RuntimeError):
    """Optimisation produced non-finite gradients or parameters."""


class CalibrationError(InfosliceError, ValueError):
    """Null calibration requested with unusable settings."""
