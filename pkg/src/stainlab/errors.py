"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new failure modes should
subclass one of the existing categories rather than raising bare ValueErrors.
"""


class StainlabError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(StainlabError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedStainCountError(InvalidArgumentError):
    """Linear deconvolution was asked to unmix more than three stains."""


class IllConditionedError(InvalidArgumentError):
    """Stain matrix condition number exceeds the configured bound."""


class DegenerateInputError(InvalidArgumentError):
    """Input carries no usable signal (e.g. an all-background image)."""


class ShapeError(StainlabError, ValueError):
    """Tensor shapes are incompatible for the requested operation."""


class TrainingDivergedError(StainlabError, RuntimeError):
    """A non-finite value appeared during training; state at the last finite
    step is preserved on the exception's ``state`` attribute when available."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotReadyError(StainlabError, RuntimeError):
    """A required artifact (checkpoint, dataset, session) does not exist yet."""
