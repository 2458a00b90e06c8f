"""Exception types shared across the package."""


class StructuralError(ValueError):
    """An operation was applied to structurally invalid operands."""


class ConfigurationError(ValueError):
    """A run/experiment configuration is inconsistent or unsupported."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, epoch=None, checkpoint=None):
        super().__init__(message)
        self.epoch = epoch
        self.checkpoint = checkpoint
