"""Exception hierarchy shared by every module of the package."""


class CLError(Exception):
    """Base class for all errors raised by cl_landscape."""


class ParameterError(CLError, ValueError):
    """An argument violates an operation's preconditions."""


class DegenerateScaleError(ParameterError):
    """The scale heuristic produced a zero (or non-finite) scale."""


class IncompatibleSketchError(CLError, ValueError):
    """Two sketches were built from different frequency matrices."""


class DegenerateAtomError(CLError, ArithmeticError):
    """An atom's sketch has zero norm, so it cannot be normalized."""


class DecodeError(CLError, RuntimeError):
    """A decoder could not produce a model."""


class DatasetIOError(CLError, OSError):
    """A dataset or sketch file is malformed.

    ``position`` holds the byte offset (binary files) or 1-based line
    number (CSV files) where the problem was found, when known.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position
