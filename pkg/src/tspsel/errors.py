"""Exception types shared across the workbench."""


class TspselError(Exception):
    """Base class for all workbench-specific errors."""


class SpecificationError(TspselError, ValueError):
    """A generation request is malformed (bad counts, inverted bounds, unknown family)."""


class ParameterError(TspselError, ValueError):
    """A family or solver parameter is outside its valid domain."""


class ParseError(TspselError, ValueError):
    """A text input could not be parsed.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateInputError(TspselError, ValueError):
    """A point set has no usable extent (all points identical)."""


class DomainError(TspselError, ValueError):
    """A numeric argument is outside the documented domain."""


class ShapeError(TspselError, ValueError):
    """An array argument has the wrong shape."""


class InvalidTourError(TspselError, ValueError):
    """A tour is not a permutation of the instance's cities."""


class SizeError(TspselError, ValueError):
    """An instance is too large for an exact algorithm."""


class NumericError(TspselError, ArithmeticError):
    """A computation produced non-finite values."""


class ConfigError(TspselError, ValueError):
    """A configuration value is inconsistent or unusable."""
