"""Параметры встроенных тестовых задач"""

from typing import List, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator


class QuarticToyParams(BaseModel):
    """f_i(x) = ¼(x - c_i)⁴ + a_i x² на отрезке [lower, upper]"""

    c: List[float] = Field(default_factory=lambda: [1.0, -1.0])
    a: List[float] = Field(default_factory=lambda: [-0.5, 1.0])
    lower: float = -3.0
    upper: float = 3.0
    x0: Optional[List[float]] = None
    # Строки связи: коэффициенты при x_1..x_N; по умолчанию x_1 - x_k = 0
    coupling: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.c) != len(self.a) or not self.c:
            raise ValueError("c and a must be non-empty and of equal length")
        if self.lower >= self.upper:
            raise ValueError("lower must be below upper")
        if self.x0 is not None and len(self.x0) != len(self.c):
            raise ValueError("x0 must give one value per agent")
        if self.coupling is not None:
            for row in self.coupling:
                if len(row) != len(self.c):
                    raise ValueError("coupling rows must give one coefficient per agent")
        return self

    @property
    def n_agents(self) -> int:
        return len(self.c)


class RandomQpParams(BaseModel):
    """Случайная выпуклая задача консенсуса с 2-назначенными строками"""

    n_agents: int = Field(default=3, ge=2)
    dims: Union[int, List[int]] = 4
    n_c: int = Field(default=6, ge=1)
    n_eq: int = Field(default=0, ge=0)
    condition: float = Field(default=10.0, ge=1.0)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_dims(self):
        dims = self.agent_dims
        if len(dims) != self.n_agents:
            raise ValueError("dims must give one entry per agent")
        if any(n <= self.n_eq for n in dims):
            raise ValueError("every agent needs more variables than local equalities")
        return self

    @property
    def agent_dims(self) -> List[int]:
        if isinstance(self.dims, int):
            return [self.dims] * self.n_agents
        return list(self.dims)


class RobotOcpConfig(BaseModel):
    """Задача оптимального управления двумя роботами с расхождением"""

    horizon: float = Field(default=2.0, gt=0)
    step: float = Field(default=0.1, gt=0)
    min_distance: float = Field(default=5.0, gt=0)
    q_weights: List[float] = Field(default_factory=lambda: [1.0, 1.0, 0.1])
    r_weights: List[float] = Field(default_factory=lambda: [1.0, 1.0])
    starts: List[List[float]] = Field(
        default_factory=lambda: [[-10.0, 1.0, 0.0], [10.0, -1.0, 3.141592653589793]]
    )
    targets: List[List[float]] = Field(
        default_factory=lambda: [[10.0, 1.0, 0.0], [-10.0, -1.0, 3.141592653589793]]
    )

    @field_validator("q_weights", "r_weights")
    @classmethod
    def _positive(cls, value):
        if any(w <= 0 for w in value):
            raise ValueError("weights must be positive")
        return value

    @model_validator(mode="after")
    def _check_grid(self):
        knots = self.horizon / self.step
        if abs(knots - round(knots)) > 1e-9:
            raise ValueError("horizon must be an integer multiple of step")
        if len(self.q_weights) != 3 or len(self.r_weights) != 2:
            raise ValueError("q_weights needs 3 entries and r_weights 2")
        if len(self.starts) != 2 or len(self.targets) != 2:
            raise ValueError("exactly two robots are supported")
        for pose in self.starts + self.targets:
            if len(pose) != 3:
                raise ValueError("poses are (x, y, theta)")
        return self

    @property
    def knots(self) -> int:
        return int(round(self.horizon / self.step))

    @classmethod
    def long_horizon(cls) -> "RobotOcpConfig":
        """Горизонт 10 с, Q = 0.1·diag(10, 10, 1), R = diag(1, 1)"""
        return cls(horizon=10.0, step=0.1, min_distance=5.0, q_weights=[1.0, 1.0, 0.1])
