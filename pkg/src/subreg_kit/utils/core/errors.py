"""
Exception hierarchy for subreg-kit.

Every error raised on purpose by the library derives from SubregError and from the
builtin exception whose meaning it refines, so callers may catch either.
"""

from typing import Optional


class SubregError(Exception):
    """Base class for all subreg-kit errors."""


class ProblemInputError(SubregError, ValueError):
    """Malformed or inconsistent problem data (dimensions, class tag, mesh)."""


class ProblemSyntaxError(ProblemInputError):
    """Problem-file syntax error with its location."""

    def __init__(self, message: str, line: int, column: int, source: Optional[str] = None):
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")


class PreconditionError(SubregError, ValueError):
    """An operation was called on data violating its precondition."""


class EmptyNormalConeError(PreconditionError):
    """A multiplier has the wrong sign, so the normal-cone residual does not exist."""


class RegularityError(PreconditionError):
    """Active control-constraint gradients are linearly dependent."""

    def __init__(self, message: str, node: int):
        self.node = node
        super().__init__(f"{message} (node {node})")


class PropagationError(SubregError, ArithmeticError):
    """A state or adjoint recursion produced non-finite values."""

    def __init__(self, message: str, node: int):
        self.node = node
        super().__init__(f"{message} (node {node})")


class RetractionError(SubregError, RuntimeError):
    """Too many growth-probe samples could not be retracted onto the feasible set."""


class InconclusiveError(SubregError, RuntimeError):
    """The available evidence neither certifies nor refutes the property."""
