"""Exception types shared across the package."""


class QviError(Exception):
    """Base class for errors raised by this package."""


class InvalidConfigError(QviError, ValueError):
    """A configuration or input violates a documented precondition."""


class InvalidParameterError(QviError, ValueError):
    """A coefficient field is outside its admissible range (e.g. ``a <= 0``)."""


class GridMismatchError(QviError, ValueError):
    """A field does not live on the grid it was paired with."""


class AllEvaluationsDivergedError(QviError):
    """Every objective evaluation in an identification run failed to converge."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history
