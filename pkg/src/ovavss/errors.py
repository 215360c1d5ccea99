class OvavssError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(OvavssError):
    """A configuration value violates a structural constraint."""


class InputError(OvavssError):
    """An operation received arguments outside its contract."""


class DimensionError(OvavssError):
    """Two operands have incompatible shapes."""

    def __init__(self, op: str, left: tuple[int, ...], right: tuple[int, ...]):
        self.op = op
        self.left = left
        self.right = right
        super().__init__(f"{op}: incompatible shapes {left} and {right}")


class NumericalError(OvavssError):
    """An op produced NaN or Inf."""

    def __init__(self, op: str):
        self.op = op
        super().__init__(f"{op} produced non-finite values")


class EvaluationError(OvavssError):
    """A function under gradient check could not be evaluated to a finite value."""


class DatasetLoadError(OvavssError):
    """A dataset file is missing, malformed or inconsistent with its manifest."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")


class CheckpointError(OvavssError):
    """A checkpoint file is corrupt."""

    def __init__(self, path, offset: int, reason: str):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path} at byte {offset}: {reason}")


class EmptyMaskError(OvavssError):
    """Raised by square cropping when a mask has no positive pixel."""
