"""Exception types shared across the package."""


class WatchdogError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(WatchdogError, ValueError):
    """Tensor or layer shape mismatch, raised at construction or call time."""


class NumericError(WatchdogError, ArithmeticError):
    """Non-finite value where a finite one is required (loss or gradient)."""


class IdxFormatError(WatchdogError, ValueError):
    """Malformed IDX file: bad magic, truncation, or out-of-range values."""


class ModelFileError(WatchdogError, ValueError):
    """Base for model file (de)serialization failures."""


class ModelVersionError(ModelFileError):
    """Model file declares an unsupported format version."""


class ModelChecksumError(ModelFileError):
    """Model file payload does not match its checksum."""


class ModelTruncationError(ModelFileError):
    """Model file is shorter than its headers promise."""


class ModelKindError(ModelFileError):
    """Model file holds a different network kind than requested."""


class ConfigError(WatchdogError, ValueError):
    """Invalid or incomplete run configuration."""


class DivergenceError(WatchdogError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
