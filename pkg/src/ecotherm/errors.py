"""Exception hierarchy shared by all ecotherm modules."""


class EcothermError(Exception):
    """Base class for every error raised by ecotherm."""


class ExprError(EcothermError, ValueError):
    """Malformed or unevaluable money-function expression."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        pointer = ""
        if text:
            pointer = "\n  " + text + "\n  " + " " * position + "^"
        super().__init__(f"{message} at position {position}{pointer}")


class UnknownIdentifierError(ExprError):
    pass


class VariableIndexError(ExprError):
    pass


class EvaluationDomainError(ExprError):
    """Raised when ln receives a non-positive argument, or a power is not real."""


class ValidityError(EcothermError, ValueError):
    """A model validity condition does not hold at the requested point.

    ``condition`` carries the violated condition in plain text, e.g.
    ``"alpha = c1/T - 1 > 0"``.
    """

    def __init__(self, message: str, condition: str = ""):
        self.condition = condition
        super().__init__(message)


class DivergentIntegralError(ValidityError):
    """The partition-function (or moment) integral does not converge."""


class QuadratureError(EcothermError, RuntimeError):
    """Non-convergence or NaN produced during numerical integration."""


class ModelFileError(EcothermError, ValueError):
    """Schema violations in a model JSON file; ``problems`` lists all of them."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid model file:\n  - " + "\n  - ".join(self.problems))
