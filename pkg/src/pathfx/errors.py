"""Exception hierarchy shared by all pathfx modules."""

from __future__ import annotations


class PathFxError(Exception):
    """Base class for every error raised by pathfx."""


# -- model construction ------------------------------------------------------


class ModelError(PathFxError, ValueError):
    """A model violates one of its structural invariants.

    ``variable`` names the offending variable when one can be singled out;
    the DSL uses it to attach a source position.
    """

    def __init__(self, message: str, variable: str | None = None):
        super().__init__(message)
        self.variable = variable


class DuplicateName(ModelError):
    pass


class MissingCpt(ModelError):
    pass


class MissingMechanism(ModelError):
    pass


class RowNotNormalized(ModelError):
    pass


class CycleDetected(ModelError):
    def __init__(self, cycle: list[str]):
        super().__init__("cycle detected: " + " -> ".join(cycle), cycle[0])
        self.cycle = cycle


class IncompleteMechanismTable(ModelError):
    pass


class ValueOutOfDomain(ModelError):
    pass


class UnknownVariable(ModelError):
    pass


# -- graphs ------------------------------------------------------------------


class GraphError(PathFxError, ValueError):
    pass


class UnknownNode(GraphError):
    pass


class NotAPath(GraphError):
    pass


class RepeatedNode(GraphError):
    pass


class TooManyPaths(GraphError):
    pass


# -- inference and sampling --------------------------------------------------


class InferenceError(PathFxError, ValueError):
    pass


class StateSpaceTooLarge(InferenceError):
    pass


class UnknownColumn(InferenceError):
    pass


class NonNumericDomain(InferenceError):
    pass


class RequiresScm(InferenceError):
    pass


class ColumnMismatch(InferenceError):
    pass


# -- model files -------------------------------------------------------------


class DslError(PathFxError, ValueError):
    """Positioned error in a model file (1-based line and column)."""

    def __init__(self, line: int, column: int, message: str, expected: str | None = None):
        self.line = line
        self.column = column
        self.message = message
        self.expected = expected
        text = f"{line}:{column}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class ParseError(DslError):
    pass


class SemanticError(DslError):
    pass
