"""Утилиты решателя"""

from .exceptions import (
    AladinError,
    ConfigurationError,
    IndefiniteDetected,
    InfeasibleConfig,
    IterationLimitError,
    LocalSolveFailure,
    NotPositiveDefinite,
    NotTwoAssigned,
    OrphanConsensusRowError,
    RankDeficientActiveJacobian,
    SingularKkt,
    SingularLocalSystem,
    SingularReducedHessian,
    UnknownAgent,
)
from .logging import setup_logging

__all__ = [
    "AladinError",
    "ConfigurationError",
    "IndefiniteDetected",
    "InfeasibleConfig",
    "IterationLimitError",
    "LocalSolveFailure",
    "NotPositiveDefinite",
    "NotTwoAssigned",
    "OrphanConsensusRowError",
    "RankDeficientActiveJacobian",
    "SingularKkt",
    "SingularLocalSystem",
    "SingularReducedHessian",
    "UnknownAgent",
    "setup_logging",
]
