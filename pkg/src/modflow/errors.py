class ModflowError(Exception):
    """Base class for library errors."""


class InputError(ModflowError, ValueError):
    """Bad input: model mismatch, violated precondition, malformed data."""


class NumericalFailure(ModflowError, ArithmeticError):
    """A numerical procedure did not reach its accuracy contract."""


class TraceInequalityError(InputError):
    """A spectral-trace value exceeds ``e^{n beta} tau(f)``."""


class WordParseError(InputError):
    """Malformed word literal; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, text: str, offset: int):
        super().__init__(f"{message} at offset {offset} in {text!r}")
        self.text = text
        self.offset = offset
