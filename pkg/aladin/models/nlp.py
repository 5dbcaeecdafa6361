"""Модели частично сепарабельной NLP задачи"""

from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

VectorFunction = Callable[[np.ndarray], np.ndarray]
WeightedHessian = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _as_vector(value: Any) -> np.ndarray:
    return np.atleast_1d(np.asarray(value, dtype=float))


class AgentProblem(BaseModel):
    """Локальная задача агента: f_i, h_i <= 0, g_i = 0 и их производные

    Гессианы ограничений передаются свёрнутыми с множителями:
    ``ineq_hessian(x, kappa) = sum_j kappa_j * hess h_j(x)``.
    """

    name: str = "agent"
    dim: int = Field(ge=1)
    objective: Callable[[np.ndarray], float]
    gradient: VectorFunction
    hessian: VectorFunction
    n_ineq: int = Field(default=0, ge=0)
    ineq: Optional[VectorFunction] = None
    ineq_jacobian: Optional[VectorFunction] = None
    ineq_hessian: Optional[WeightedHessian] = None
    n_eq: int = Field(default=0, ge=0)
    eq: Optional[VectorFunction] = None
    eq_jacobian: Optional[VectorFunction] = None
    eq_hessian: Optional[WeightedHessian] = None
    x0: np.ndarray
    # Область для проверок конечными разностями
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("x0", "lower", "upper", mode="before")
    @classmethod
    def _coerce_vector(cls, value):
        if value is None:
            return None
        return _as_vector(value)

    @model_validator(mode="after")
    def _check_callbacks(self):
        if self.x0.shape != (self.dim,):
            raise ValueError(f"x0 of {self.name} has shape {self.x0.shape}, expected ({self.dim},)")
        if self.n_ineq and (self.ineq is None or self.ineq_jacobian is None):
            raise ValueError(f"{self.name} declares {self.n_ineq} inequalities without callbacks")
        if self.n_eq and (self.eq is None or self.eq_jacobian is None):
            raise ValueError(f"{self.name} declares {self.n_eq} equalities without callbacks")
        return self

    def h(self, x: np.ndarray) -> np.ndarray:
        """Значения неравенств h_i(x)"""
        if not self.n_ineq:
            return np.zeros(0)
        return _as_vector(self.ineq(x))

    def dh(self, x: np.ndarray) -> np.ndarray:
        """Якобиан неравенств"""
        if not self.n_ineq:
            return np.zeros((0, self.dim))
        return np.asarray(self.ineq_jacobian(x), dtype=float).reshape(self.n_ineq, self.dim)

    def g(self, x: np.ndarray) -> np.ndarray:
        """Значения равенств g_i(x)"""
        if not self.n_eq:
            return np.zeros(0)
        return _as_vector(self.eq(x))

    def dg(self, x: np.ndarray) -> np.ndarray:
        """Якобиан равенств"""
        if not self.n_eq:
            return np.zeros((0, self.dim))
        return np.asarray(self.eq_jacobian(x), dtype=float).reshape(self.n_eq, self.dim)

    def lagrangian_hessian(
        self,
        x: np.ndarray,
        kappa: Optional[np.ndarray] = None,
        kappa_eq: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Гессиан f_i + kappa^T h_i + kappa_eq^T g_i"""
        hess = np.array(self.hessian(x), dtype=float).reshape(self.dim, self.dim)
        if self.n_ineq and kappa is not None and self.ineq_hessian is not None:
            hess = hess + np.asarray(self.ineq_hessian(x, kappa), dtype=float)
        if self.n_eq and kappa_eq is not None and self.eq_hessian is not None:
            hess = hess + np.asarray(self.eq_hessian(x, kappa_eq), dtype=float)
        return 0.5 * (hess + hess.T)


class PartitionedNlp(BaseModel):
    """Задача sum f_i(x_i) при h_i(x_i) <= 0 и sum A_i x_i = 0"""

    name: str = "nlp"
    agents: List[AgentProblem] = Field(min_length=1)
    coupling: List[np.ndarray]
    n_c: int = Field(ge=1)
    # Размерности до переформулировки (копии дописываются в конец вектора)
    original_dims: Optional[List[int]] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("coupling", mode="before")
    @classmethod
    def _coerce_coupling(cls, value):
        return [np.atleast_2d(np.asarray(a, dtype=float)) for a in value]

    @model_validator(mode="after")
    def _check_shapes(self):
        if len(self.coupling) != len(self.agents):
            raise ValueError(
                f"{len(self.coupling)} coupling matrices for {len(self.agents)} agents"
            )
        for i, (agent, a_i) in enumerate(zip(self.agents, self.coupling)):
            if a_i.shape != (self.n_c, agent.dim):
                raise ValueError(
                    f"A_{i} has shape {a_i.shape}, expected ({self.n_c}, {agent.dim})"
                )
        return self

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def dims(self) -> List[int]:
        return [agent.dim for agent in self.agents]

    def consensus_residual(self, xs: List[np.ndarray]) -> np.ndarray:
        """sum_i A_i x_i"""
        total = np.zeros(self.n_c)
        for a_i, x_i in zip(self.coupling, xs):
            total = total + a_i @ x_i
        return total

    def objective(self, xs: List[np.ndarray]) -> float:
        return float(sum(agent.objective(x_i) for agent, x_i in zip(self.agents, xs)))

    def initial_guess(self) -> List[np.ndarray]:
        return [agent.x0.copy() for agent in self.agents]

    def restrict_to_original(self, xs: List[np.ndarray]) -> List[np.ndarray]:
        """Отбрасывает копии переменных, добавленные переформулировкой"""
        if self.original_dims is None:
            return [np.asarray(x_i) for x_i in xs]
        return [np.asarray(x_i)[:n] for x_i, n in zip(xs, self.original_dims)]


class AssignmentMap(BaseModel):
    """Назначение строк консенсуса агентам: R(j) и C(i), индексы с нуля"""

    r_assigned: List[Tuple[int, ...]]
    c_assigned: List[Tuple[int, ...]]

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_transpose(self):
        for j, agents in enumerate(self.r_assigned):
            for i in agents:
                if i >= len(self.c_assigned) or j not in self.c_assigned[i]:
                    raise ValueError(f"R({j}) contains {i} but C({i}) lacks {j}")
        for i, rows in enumerate(self.c_assigned):
            for j in rows:
                if j >= len(self.r_assigned) or i not in self.r_assigned[j]:
                    raise ValueError(f"C({i}) contains {j} but R({j}) lacks {i}")
        return self

    @property
    def n_c(self) -> int:
        return len(self.r_assigned)

    @property
    def n_agents(self) -> int:
        return len(self.c_assigned)

    @property
    def assignment_degree(self) -> int:
        return max((len(agents) for agents in self.r_assigned), default=0)

    @property
    def row_degrees(self) -> List[int]:
        return [len(agents) for agents in self.r_assigned]

    def owner(self, row: int) -> int:
        """Агент с наименьшим индексом в R(j) ведёт вычисления строки j"""
        return self.r_assigned[row][0]

    def owned_rows(self, agent: int) -> Tuple[int, ...]:
        return tuple(j for j in self.c_assigned[agent] if self.owner(j) == agent)

    def mirrors(self, row: int) -> Tuple[int, ...]:
        return self.r_assigned[row][1:]

    def neighbors(self, agent: int) -> Tuple[int, ...]:
        """Агенты, делящие с данным хотя бы одну строку консенсуса"""
        found = set()
        for j in self.c_assigned[agent]:
            found.update(self.r_assigned[j])
        found.discard(agent)
        return tuple(sorted(found))

    def shared_rows(self, agent: int, other: int) -> Tuple[int, ...]:
        return tuple(sorted(set(self.c_assigned[agent]) & set(self.c_assigned[other])))


class ConsistencyViolation(BaseModel):
    """Запись отчёта validate_consistency"""

    agent: Optional[int] = None
    kind: str
    detail: str
    max_relative_error: Optional[float] = None
