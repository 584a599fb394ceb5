"""Exception hierarchy shared by all modules.

Usage-type errors (bad input, bad parameters) derive from ``UsageError``;
failures of a numerical computation that was set up correctly derive from
``NumericalFailure``.  The CLI maps the two families to different exit codes.
"""

from __future__ import annotations


class PeanoError(Exception):
    """Base class for every error raised by the package."""

    module = "peanoivp"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class UsageError(PeanoError, ValueError):
    """Invalid input: malformed expression, inconsistent problem, bad grid."""


class NumericalFailure(PeanoError, ArithmeticError):
    """A well-posed computation could not be completed."""


class ExpressionSyntaxError(UsageError):
    module = "rhs_lang"

    def __init__(self, message: str, column: int, source: str = ""):
        self.column = column
        self.source = source
        super().__init__(f"{message} at column {column}")


class EvaluationError(NumericalFailure):
    """Domain error while evaluating an expression (log of 0, 1/0, ...)."""

    module = "rhs_lang"

    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        if subexpression:
            message = f"{message} in `{subexpression}`"
        super().__init__(message)


class ProblemError(UsageError):
    module = "problem"


class GridError(UsageError):
    module = "gridfn"


class BoxExitError(NumericalFailure):
    """An approximate solution left the box ``|y - y0| <= b``."""

    def __init__(self, message: str, t: float, module: str = "integrators"):
        self.t = t = float(t)
        self.module = module
        super().__init__(f"{message} (t={t!r})")


class BoundViolationError(NumericalFailure):
    """``|f|`` exceeded the claimed bound L along a trajectory."""

    def __init__(self, message: str, t: float, module: str = "integrators"):
        self.t = t = float(t)
        self.module = module
        super().__init__(f"{message} (t={t!r})")


class BracketError(NumericalFailure):
    """Envelope or bisection failure while building bracketed segments."""

    module = "bounds"
