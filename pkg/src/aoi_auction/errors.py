"""Exception types raised across the package."""


class InvalidInput(ValueError):
    """An argument violates an operation's precondition."""


class TrainingError(RuntimeError):
    """Training diverged. The last finite parameters are kept on the exception."""

    def __init__(self, message, params=None, history=None):
        super().__init__(message)
        self.params = params
        self.history = history


class CheckpointError(Exception):
    """A checkpoint could not be read or does not match the expected shape."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""
