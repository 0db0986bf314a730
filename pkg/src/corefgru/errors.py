"""Exception types shared across the package."""


class CorefGRUError(Exception):
    """Base class for all package-specific errors."""


class InvalidShape(CorefGRUError, ValueError):
    """A tensor argument has the wrong shape or an empty/odd dimension."""


class UnsupportedOp(CorefGRUError, RuntimeError):
    """Backward pass reached a recorded op without a registered adjoint."""


class NonDeterministic(CorefGRUError, RuntimeError):
    """A loss builder produced different values on identical inputs."""


class OverlapError(CorefGRUError, ValueError):
    """A token is claimed by two coreference clusters."""


class RangeError(CorefGRUError, ValueError):
    """A numeric argument is outside its documented range."""


class OrderViolation(CorefGRUError, ValueError):
    """An antecedent index refers to a token not yet processed."""


class MissingMention(CorefGRUError, ValueError):
    """A candidate has no mention positions in the passage."""


class LabelError(CorefGRUError, ValueError):
    """A training answer is outside the class vocabulary."""


class SpecError(CorefGRUError, ValueError):
    """A generator spec cannot be satisfied as stated."""


class DivergenceError(CorefGRUError, RuntimeError):
    """Training produced a non-finite loss.

    Carries the index of the offending update.
    """

    def __init__(self, update_index: int, message: str = ""):
        self.update_index = update_index
        super().__init__(message or f"non-finite loss at update {update_index}")


class IncompatibleCheckpoint(CorefGRUError, ValueError):
    """A checkpoint cannot be applied to the given dataset or model."""


class VersionError(CorefGRUError, ValueError):
    """A checkpoint was written by an unsupported format version."""


class CorruptCheckpoint(CorefGRUError, ValueError):
    """A checkpoint file is malformed or truncated."""
