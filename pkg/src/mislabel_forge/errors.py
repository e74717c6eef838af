"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
runtime/numeric failures with 3.
"""


class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, out-of-range parameters, malformed files."""


class TrainingDivergedError(RuntimeError):
    """Raised when a training step produces a non-finite loss or parameter."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
