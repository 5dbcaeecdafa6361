"""Исключения решателя двухуровневого распределённого ALADIN"""

from typing import Optional

import numpy as np


class AladinError(Exception):
    """Базовое исключение решателя"""

    def __init__(self, message: str, error_type: str = "aladin", exit_code: int = 2):
        self.message = message
        self.error_type = error_type
        self.exit_code = exit_code
        super().__init__(message)


class ConfigurationError(AladinError):
    """Ошибка конфигурации сценария"""

    def __init__(self, message: str):
        super().__init__(message=message, error_type="configuration", exit_code=3)


class OrphanConsensusRowError(AladinError):
    """Строка консенсуса, к которой не назначен ни один агент"""

    def __init__(self, row: int):
        self.row = row
        super().__init__(
            message=f"Consensus row {row} has no assigned agent",
            error_type="orphanConsensusRow",
        )


class LocalSolveFailure(AladinError):
    """Локальная NLP задача агента не решена с нужной точностью"""

    def __init__(
        self,
        message: str,
        agent: Optional[int] = None,
        last_iterate: Optional[np.ndarray] = None,
        residual: float = float("nan"),
    ):
        self.agent = agent
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(message=message, error_type="localSolveFailure")


class RankDeficientActiveJacobian(AladinError):
    """Нарушено LICQ: якобиан активных ограничений не полного ранга"""

    def __init__(self, rows: int, rank: int):
        self.rows = rows
        self.rank = rank
        super().__init__(
            message=f"Active Jacobian has {rows} rows but rank {rank}",
            error_type="rankDeficientActiveJacobian",
        )


class SingularReducedHessian(AladinError):
    """Не удалось факторизовать спроецированный гессиан"""

    def __init__(self, message: str):
        super().__init__(message=message, error_type="singularReducedHessian")


class SingularKkt(AladinError):
    """Вырожденная KKT система координационной задачи"""

    def __init__(self, message: str):
        super().__init__(message=message, error_type="singularKkt")


class NotPositiveDefinite(AladinError):
    """Сконденсированная матрица не положительно определена"""

    def __init__(self, message: str):
        super().__init__(message=message, error_type="notPositiveDefinite")


class NotTwoAssigned(AladinError):
    """Задача не 2-назначенная, децентрализованные методы неприменимы"""

    def __init__(self, degree: int):
        self.degree = degree
        super().__init__(
            message=f"Problem is {degree}-assigned, decentralized inner solvers need degree <= 2",
            error_type="notTwoAssigned",
        )


class IndefiniteDetected(AladinError):
    """CG обнаружил неположительную кривизну"""

    def __init__(self, curvature: float, iteration: int):
        self.curvature = curvature
        self.iteration = iteration
        super().__init__(
            message=f"Non-positive curvature {curvature:.3e} at CG iteration {iteration}",
            error_type="indefiniteDetected",
        )


class SingularLocalSystem(AladinError):
    """Локальная система ADMM (S̃_i + ρI) не факторизуется"""

    def __init__(self, agent: int):
        self.agent = agent
        super().__init__(
            message=f"Local ADMM system of agent {agent} failed to factor",
            error_type="singularLocalSystem",
        )


class UnknownAgent(AladinError):
    """Сообщение адресовано несуществующему агенту"""

    def __init__(self, agent: int):
        self.agent = agent
        super().__init__(message=f"Unknown agent id {agent}", error_type="unknownAgent")


class InfeasibleConfig(AladinError):
    """Параметры задачи заведомо недопустимы"""

    def __init__(self, message: str):
        super().__init__(message=message, error_type="infeasibleConfig", exit_code=3)


class IterationLimitError(AladinError):
    """Исчерпан лимит итераций"""

    def __init__(self, message: str):
        super().__init__(message=message, error_type="iterationLimit", exit_code=1)
