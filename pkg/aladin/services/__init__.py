"""Сервисы решателя"""

from .aladin import BilevelAladin
from .assignment import build_assignment, reformulate_two_assigned
from .coordination import solve_condensed_exact, solve_full_qp
from .local_solver import LocalSolver
from .netsim import NetworkSimulator, expected_counts
from .problems import build_problem
from .runner import compare, run

__all__ = [
    "BilevelAladin",
    "LocalSolver",
    "NetworkSimulator",
    "build_assignment",
    "build_problem",
    "compare",
    "expected_counts",
    "reformulate_two_assigned",
    "run",
    "solve_condensed_exact",
    "solve_full_qp",
]
