"""Convex QP/LP solver used by the synthesis loops and the LP model-checking oracle."""

from .admm import MAX_ITERATIONS, OPTIMAL, PRIMAL_INFEASIBLE, SolveReport, solve
from .problem import Atoms, ConvexProblem, dump_problem, load_problem, residuals

__all__ = [
    "Atoms", "ConvexProblem", "SolveReport", "solve", "residuals", "dump_problem", "load_problem",
    "OPTIMAL", "PRIMAL_INFEASIBLE", "MAX_ITERATIONS",
]
