"""Exception hierarchy shared by every module."""


class MarginError(Exception):
    """Base class for all errors raised by hypermargin."""


class DegenerateInputError(MarginError, ValueError):
    """Input has no usable direction (zero norm, empty set, single class)."""


class ShapeError(MarginError, ValueError):
    pass


class ParameterError(MarginError, ValueError):
    pass


class InvariantViolationError(MarginError, ValueError):
    pass


class NumericalError(MarginError, ArithmeticError):
    pass


class MissingClassError(MarginError, ValueError):
    def __init__(self, class_id, where="training data"):
        self.class_id = class_id
        super().__init__(f"class {class_id} has no samples in {where}")


class ConfigurationError(MarginError, ValueError):
    """Bad run configuration. ``key`` names the offending entry when known."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message if key is None else f"{key}: {message}")


class DivergenceError(MarginError, ArithmeticError):
    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, batch {batch}")


class DataParseError(MarginError, ValueError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = path, line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


class CheckpointError(MarginError, ValueError):
    pass
