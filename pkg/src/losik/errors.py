"""Exception hierarchy shared by all modules."""


class LosikError(Exception):
    """Base class for every error raised by the toolkit."""


class DimensionMismatch(LosikError, ValueError):
    pass


class DomainError(LosikError, ValueError):
    """A function was evaluated outside the domain where it is smooth."""


class DivisionBySingular(DomainError, ZeroDivisionError):
    """Division by a Taylor value whose constant term vanishes."""


class ExprSyntaxError(LosikError, ValueError):
    """Malformed expression source.

    ``position`` is the 0-based character offset of the offending token and
    ``expected`` lists what the parser would have accepted there.
    """

    def __init__(self, message, position=None, expected=()):
        self.position = position
        self.expected = tuple(expected)
        if position is not None:
            message = f"{message} at position {position}"
        if self.expected:
            message = f"{message} (expected {', '.join(self.expected)})"
        super().__init__(message)


class UnknownIdentifier(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class SingularJacobian(DomainError):
    pass


class SingularMatrix(DomainError):
    pass


class ZeroDeterminant(SingularMatrix):
    pass


class BlowUp(LosikError, ArithmeticError):
    """A trajectory left the representable range."""


class IntegrandSingular(DomainError):
    pass


class ProfileDomainError(DomainError):
    pass
