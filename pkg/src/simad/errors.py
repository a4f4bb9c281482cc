"""Exception types shared across the package."""


class SimADError(Exception):
    """Base class for all package errors."""


class DimensionError(SimADError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(SimADError, ValueError):
    """A precondition of an operation was violated."""


class ConfigError(SimADError, ValueError):
    """Invalid model, training or run configuration."""


class UndefinedMetricError(SimADError, ValueError):
    """A metric is mathematically undefined for the given inputs."""


class TrainingError(SimADError, RuntimeError):
    """Training diverged.

    ``model`` holds the last parameters that produced a finite loss and
    ``log`` the records written up to the failure.
    """

    def __init__(self, message, model=None, log=None, component=None):
        super().__init__(message)
        self.model = model
        self.log = log if log is not None else []
        self.component = component


class CheckpointError(SimADError, ValueError):
    """Checkpoint bytes are malformed, corrupted or of an unknown version."""


class GenerationError(SimADError, RuntimeError):
    """Synthetic data could not be generated for the requested layout."""


class DataFormatError(SimADError, ValueError):
    """A data file could not be parsed; the message carries line and column."""

    def __init__(self, message, path=None, line=None, column=None):
        where = ":".join(str(p) for p in (path, line, column) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.line, self.column = path, line, column
