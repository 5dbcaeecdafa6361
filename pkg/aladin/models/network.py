"""Модели симулятора сети и учёта коммуникаций"""

from enum import Enum
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

COORDINATOR = -1


class MessageTag(str, Enum):
    """Фаза, к которой относится сообщение"""

    PREP = "prep"
    INIT_LOCAL = "init-local"
    INIT_GLOBAL = "init-global"
    INNER_LOCAL = "inner-local"
    INNER_GLOBAL = "inner-global"
    FORWARD = "forward"
    FORWARD_RHS = "forward-rhs"
    BACKWARD = "backward"


# Счётчик журнала для каждого тега
TAG_BUCKETS: Dict[MessageTag, str] = {
    MessageTag.PREP: "local_prep",
    MessageTag.INIT_LOCAL: "local_init",
    MessageTag.INIT_GLOBAL: "global_init",
    MessageTag.INNER_LOCAL: "local_iter",
    MessageTag.INNER_GLOBAL: "global_iter",
    MessageTag.FORWARD: "forward_global",
    MessageTag.FORWARD_RHS: "forward_rhs",
    MessageTag.BACKWARD: "backward",
}


class Message(BaseModel):
    """Сообщение между агентами (COORDINATOR = -1 для центрального узла)"""

    sender: int
    receiver: int
    payload: np.ndarray
    tag: MessageTag
    # Строки консенсуса, к которым относится содержимое
    rows: Tuple[int, ...] = ()

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("payload", mode="before")
    @classmethod
    def _coerce_payload(cls, value):
        payload = np.atleast_1d(np.asarray(value, dtype=float))
        if payload.ndim != 1 or payload.size < 1:
            raise ValueError("Message payload must be a non-empty vector")
        return payload

    @property
    def length(self) -> int:
        return int(self.payload.size)


class CommLedger(BaseModel):
    """Число переданных чисел с плавающей точкой по категориям"""

    local_prep: int = 0
    local_init: int = 0
    local_iter: int = 0
    global_init: int = 0
    global_iter: int = 0
    forward_global: int = 0
    forward_rhs: int = 0
    backward: int = 0

    def charge(self, tag: MessageTag, floats: int) -> None:
        bucket = TAG_BUCKETS[MessageTag(tag)]
        setattr(self, bucket, getattr(self, bucket) + int(floats))

    def __add__(self, other: "CommLedger") -> "CommLedger":
        return CommLedger(
            **{name: getattr(self, name) + getattr(other, name) for name in self.model_fields}
        )

    @property
    def local_total(self) -> int:
        return self.local_prep + self.local_init + self.local_iter

    @property
    def global_total(self) -> int:
        return self.global_init + self.global_iter + self.forward_global

    def table_counts(self) -> Dict[str, int]:
        """Категории, сравниваемые с замкнутыми формулами прямой коммуникации"""
        return {
            "local_prep": self.local_prep,
            "local_iter": self.local_iter,
            "global_iter": self.global_iter,
            "forward_global": self.forward_global,
        }


class TraceRecord(BaseModel):
    """Строка журнала сообщений"""

    round: int = Field(ge=0)
    sender: int
    receiver: int
    tag: MessageTag
    length: int = Field(ge=1)

    def to_line(self) -> str:
        return f"{self.round},{self.sender},{self.receiver},{self.tag.value},{self.length}"
