"""Модели координационного шага"""

from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from .network import CommLedger


class InexactnessMode(str, Enum):
    """Режим остановки внутреннего решателя"""

    FIXED_ITERATIONS = "fixed-iterations"
    RESIDUAL = "residual-controlled"


class EtaSchedule(str, Enum):
    """Правило выбора η на внешней итерации"""

    FIXED = "fixed"
    ADAPTIVE = "adaptive"  # η = min(η_max, ‖m(p)‖)


class InexactnessBudget(BaseModel):
    """Допуск неточности ‖r_λ‖ <= η ‖m(p)‖"""

    eta: float = Field(default=0.1, gt=0)
    mode: InexactnessMode = InexactnessMode.FIXED_ITERATIONS
    m_norm: float = Field(default=1.0, ge=0)
    schedule: EtaSchedule = EtaSchedule.FIXED
    eta_max: float = Field(default=0.1, gt=0)

    class Config:
        frozen = True

    @property
    def target(self) -> float:
        return self.eta * self.m_norm

    def refresh(self, m_norm: float) -> "InexactnessBudget":
        """Обновляет ‖m(p)‖ и, для адаптивного расписания, η"""
        eta = self.eta
        if self.schedule == EtaSchedule.ADAPTIVE and m_norm > 0:
            eta = min(self.eta_max, m_norm)
        return self.model_copy(update={"m_norm": float(m_norm), "eta": eta})


class CoordinationResult(BaseModel):
    """Решение координационной задачи"""

    lambda_qp: np.ndarray
    delta_x: List[np.ndarray] = Field(default_factory=list)
    slack: Optional[np.ndarray] = None
    residual_norm: float = 0.0
    inner_iterations: int = 0
    exact: bool = True
    ledger_delta: CommLedger = Field(default_factory=CommLedger)
    history: List[Dict[str, Any]] = Field(default_factory=list)

    class Config:
        arbitrary_types_allowed = True
