"""Результаты локального шага и вклады в сконденсированную систему"""

from typing import Any, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config import settings


class LocalStepResult(BaseModel):
    """Решение локальной задачи агента (шаг 1 ALADIN)

    При заданных ``ineq_values`` проверяются допустимость h_i(x) <= tol_feas
    и дополняющая нежёсткость |κ_j h_j(x)| <= tol_comp.
    """

    agent: int
    x: np.ndarray
    kappa: np.ndarray  # множители неравенств, kappa >= 0
    kappa_eq: np.ndarray  # множители равенств, знак произвольный
    active_set: Tuple[int, ...] = ()
    objective: float
    kkt_residual: float = 0.0
    iterations: int = 0
    method: str = "SLSQP"
    ineq_values: Optional[np.ndarray] = None
    tol_feas: float = Field(default_factory=lambda: settings.tol_feas, gt=0)
    tol_comp: float = Field(default_factory=lambda: settings.tol_comp, gt=0)

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @model_validator(mode="after")
    def _check_invariants(self):
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.size and kappa.min() < -self.tol_feas:
            raise ValueError(f"Agent {self.agent}: negative inequality multiplier {kappa.min():.3e}")
        if self.ineq_values is None:
            return self
        h = np.asarray(self.ineq_values, dtype=float)
        if h.shape != kappa.shape:
            raise ValueError(f"Agent {self.agent}: {h.size} inequality values for {kappa.size} multipliers")
        if h.size and h.max() > self.tol_feas:
            raise ValueError(f"Agent {self.agent}: inequality violated by {h.max():.3e}")
        if h.size and np.max(np.abs(kappa * h)) > self.tol_comp:
            raise ValueError(f"Agent {self.agent}: complementarity violated by {np.max(np.abs(kappa * h)):.3e}")
        return self


class AgentSensitivities(BaseModel):
    """Чувствительности агента в точке x_i

    ``h_bar`` уже регуляризован, ``h_bar_factor`` хранит его разложение
    Холецкого и переиспользуется в condense и back_substitute.
    """

    agent: int
    x: np.ndarray
    H: np.ndarray
    g: np.ndarray
    c_act: np.ndarray
    Z: np.ndarray
    h_bar: np.ndarray
    h_bar_factor: Optional[Any] = None
    active_set: Tuple[int, ...] = ()
    n_eq: int = 0
    # множители строк c_act: активные неравенства, затем равенства
    multipliers: np.ndarray = Field(default_factory=lambda: np.zeros(0))

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def n_act(self) -> int:
        return int(self.c_act.shape[0])

    @property
    def nullspace_dim(self) -> int:
        return int(self.Z.shape[1])


class CondensedContribution(BaseModel):
    """Вклад агента S_i, s_i и μ-дополненные S̃_i, s̃_i"""

    agent: int
    S: np.ndarray
    s: np.ndarray
    S_tilde: Optional[np.ndarray] = None
    s_tilde: Optional[np.ndarray] = None
    assigned_rows: Tuple[int, ...] = ()

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def is_augmented(self) -> bool:
        return self.S_tilde is not None and self.s_tilde is not None
