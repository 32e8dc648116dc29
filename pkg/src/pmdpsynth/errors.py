"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PmdpError(Exception):
    """Base class for all errors raised by pmdpsynth."""


class MissingParameter(PmdpError):
    def __init__(self, name):
        super().__init__(f"no value given for parameter {name!r}")
        self.name = name


class UnknownParameter(PmdpError):
    def __init__(self, name, line=None, col=None):
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"unknown parameter {name!r}{where}")
        self.name = name
        self.line = line
        self.col = col


class NotWellDefined(PmdpError):
    """Instantiation does not yield a stochastic model.

    ``violations`` lists ``(state, action, successor)`` triples; the successor
    is ``None`` when the whole row fails to sum to one.
    """

    def __init__(self, violations):
        shown = ", ".join(map(str, violations[:5]))
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"instantiation is not well defined: {shown}{more}")
        self.violations = list(violations)


class NonAffineModel(PmdpError):
    pass


class ModelSyntaxError(PmdpError):
    def __init__(self, message, line=None, col=None):
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.col = col


class SpecSyntaxError(PmdpError):
    pass


class InfeasibleTrivially(PmdpError):
    """The initial state's value is fixed by the graph and violates the threshold."""


class NonConvergence(PmdpError):
    def __init__(self, iterations):
        super().__init__(f"value iteration did not converge within {iterations} iterations")
        self.iterations = iterations


class InfiniteCost(PmdpError):
    def __init__(self, states):
        states = sorted(states)
        super().__init__(f"goal not reached almost surely from states {states[:10]}")
        self.states = states


class ShapeMismatch(PmdpError):
    pass


class NonRectangularRegion(PmdpError):
    pass
