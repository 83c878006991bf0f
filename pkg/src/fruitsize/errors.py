"""Exception hierarchy shared by the whole package."""


class FruitSizeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(FruitSizeError, ValueError):
    """An argument violates a documented precondition."""


class EmptyInputError(InvalidArgumentError):
    """An operation that needs data received none."""


class ParseError(FruitSizeError, ValueError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class InsufficientPointsError(InvalidArgumentError):
    """Fewer points than the fitting method requires."""


class DegenerateGeometryError(FruitSizeError):
    """Cloud does not span enough dimensions for the requested model."""


class DegenerateSampleError(FruitSizeError):
    """A minimal sample does not determine a unique model."""


class NoConsensusError(FruitSizeError):
    """No RANSAC hypothesis reached the required inlier count."""


class InvalidModelError(FruitSizeError):
    """A model object violates its own invariants."""


class UndefinedStatisticError(FruitSizeError):
    """The requested statistic is undefined for this input."""
