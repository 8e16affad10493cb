"""Exception hierarchy.

Validation problems derive from ``ValidationError`` (a ``ValueError``);
numerical breakdowns derive from ``NumericalError``. The CLI maps the two
families to distinct exit codes.
"""


class InfHSError(Exception):
    pass


class ValidationError(InfHSError, ValueError):
    pass


class DimensionMismatch(ValidationError):
    pass


class MissingIntercept(ValidationError):
    pass


class InvalidHyper(ValidationError):
    pass


class InvalidBinaryResponse(ValidationError):
    pass


class UnsupportedCombination(ValidationError):
    pass


class DegenerateLabels(ValidationError):
    pass


class NumericalError(InfHSError, ArithmeticError):
    pass


class NoPositiveRoot(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class AcceptanceStall(NumericalError):
    def __init__(self, message, proposals_used=None):
        super().__init__(message)
        self.proposals_used = proposals_used


class SingularSystem(NumericalError):
    pass


class NumericalOverflow(NumericalError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ElboDecrease(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class BadFlag(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class IoError(InfHSError, OSError):
    pass
