"""
Error Types
Exception hierarchy shared by the emulator, the oracles and the CLI.
"""


class QsimError(Exception):
    """Base class for every error raised by qsim."""


class QsimWarning(UserWarning):
    """Recoverable physics warning (edge tails, literal-mode norm growth)."""


class ValidationError(QsimError, ValueError):
    """A type or config invariant is violated. The message names the invariant."""


class InvalidPlan(ValidationError):
    pass


class InvalidTerm(ValidationError):
    pass


class UnresolvableWidth(ValidationError):
    pass


class ParseError(QsimError):
    """Malformed problem file, annotated with path:line:col."""


class IndexOutOfRange(QsimError, IndexError):
    pass


class QubitOutOfRange(IndexOutOfRange):
    pass


class RegisterOutOfRange(IndexOutOfRange):
    pass


class CapExceeded(QsimError):
    pass


class NonUnitaryGate(QsimError, ValueError):
    pass


class NonFinitePhase(QsimError, ArithmeticError):
    pass


class UnnormalizedState(QsimError, ValueError):
    pass


class DimensionMismatch(QsimError, ValueError):
    pass


class NonHermitian(QsimError, ValueError):
    pass


class UnknownAnalyticCase(QsimError, KeyError):
    pass


class ToleranceFailure(QsimError):
    """An embedded tolerance check of a bundled config failed."""


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TOLERANCE = 3
EXIT_CAP = 4
