"""Executable Peano existence theory for initial value problems.

Approximate solutions come with residual certificates; for scalar problems the
package also approximates the least and greatest solutions and certifies
lower and upper solutions.
"""

from .errors import (
    BoundViolationError,
    BoxExitError,
    BracketError,
    EvaluationError,
    ExpressionSyntaxError,
    GridError,
    NumericalFailure,
    PeanoError,
    ProblemError,
    UsageError,
)

__version__ = "0.1.0"
