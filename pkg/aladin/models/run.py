"""Модели конфигурации запуска, истории итераций и итоговой сводки"""

from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config import settings
from .coordination import EtaSchedule, InexactnessMode
from .network import CommLedger

Variant = Literal["standard", "condensed-exact", "bilevel-cg", "bilevel-admm"]
ProblemName = Literal["quartic_toy", "random_qp", "robot_ocp"]

BILEVEL_VARIANTS = ("bilevel-cg", "bilevel-admm")


class OuterParams(BaseModel):
    """Параметры внешнего цикла ALADIN"""

    rho: float = Field(default=1e2, gt=0)
    mu: float = Field(default=1e6, gt=0)
    # Σ_i = sigma_i · I: одно число для всех агентов или по числу на агента
    sigma: Union[float, List[float]] = 1.0
    tol: float = Field(default_factory=lambda: settings.tol_outer, gt=0)
    max_iterations: int = Field(default=50, ge=1)
    mu_growth: float = Field(default=1.0, ge=1.0)
    mu_max: float = Field(default=1e12, gt=0)

    @model_validator(mode="after")
    def _check_sigma(self):
        values = self.sigma if isinstance(self.sigma, list) else [self.sigma]
        if any(v <= 0 for v in values):
            raise ValueError("sigma scaling must be positive")
        return self

    def sigma_for(self, agent: int) -> float:
        if isinstance(self.sigma, list):
            return float(self.sigma[agent])
        return float(self.sigma)


class InnerParams(BaseModel):
    """Параметры внутреннего решателя координационной задачи"""

    mode: InexactnessMode = InexactnessMode.FIXED_ITERATIONS
    n_cg: int = Field(default=80, ge=1)
    n_ad: int = Field(default=400, ge=1)
    rho_admm: float = Field(default=2e-2, gt=0)
    eta: float = Field(default=0.1, gt=0)
    eta_schedule: EtaSchedule = EtaSchedule.FIXED
    eta_max: float = Field(default=0.1, gt=0)
    max_iterations: int = Field(default_factory=lambda: settings.inner_max_iterations, ge=1)


class OutputParams(BaseModel):
    """Куда писать результаты"""

    directory: Optional[str] = None
    write_trace: bool = True


class RunConfig(BaseModel):
    """Полная конфигурация запуска сценария"""

    name: str = "run"
    problem: ProblemName = "quartic_toy"
    params: Dict[str, Any] = Field(default_factory=dict)
    variant: Variant = "condensed-exact"
    reformulate: bool = True
    seed: int = Field(default=0, ge=0)
    outer: OuterParams = Field(default_factory=OuterParams)
    inner: InnerParams = Field(default_factory=InnerParams)
    output: OutputParams = Field(default_factory=OutputParams)

    @property
    def is_bilevel(self) -> bool:
        return self.variant in BILEVEL_VARIANTS


class IterationRecord(BaseModel):
    """Строка iters.csv"""

    iteration: int
    consensus_residual: float
    primal_gap: float
    lambda_residual: float = float("nan")
    m_norm: float = float("nan")
    eta: float = float("nan")
    accepted: bool = True
    inner_iterations: int = 0
    mu: float
    objective: float
    ledger: CommLedger = Field(default_factory=CommLedger)

    def to_row(self) -> Dict[str, Any]:
        row = self.model_dump(exclude={"ledger"})
        row.update(self.ledger.model_dump())
        return row


class RunSummary(BaseModel):
    """Содержимое summary.json"""

    name: str = "run"
    variant: Variant
    problem: str
    converged: bool
    outer_iterations: int
    total_inner_iterations: int
    final_consensus_residual: float
    final_primal_gap: float
    objective: float
    ledger: CommLedger
    solution_sha256: str
    error: Optional[str] = None
    exit_code: int = 0


class OuterState(BaseModel):
    """Итерат ALADIN: z_i, λ, x_i, κ_i и μ"""

    z: List[np.ndarray]
    lam: np.ndarray
    x: List[np.ndarray] = Field(default_factory=list)
    kappa: List[np.ndarray] = Field(default_factory=list)
    mu: float
    iteration: int = 0
    converged: bool = False

    class Config:
        arbitrary_types_allowed = True
