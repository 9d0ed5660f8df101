"""Restarted PDHG for linear programming with KKT-error-based restarts."""

from .model import GeneralFormLp, PrimalDualPoint, make_lp
from .mps import read_mps
from .solver import SolveResult, SolverParams, SolveStatus, solve

__all__ = [
    "GeneralFormLp",
    "PrimalDualPoint",
    "SolveResult",
    "SolveStatus",
    "SolverParams",
    "make_lp",
    "read_mps",
    "solve",
]
__version__ = "0.1.0"
