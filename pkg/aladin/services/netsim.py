"""Синхронный симулятор сети агентов и учёт переданных чисел"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence

from ..models.network import COORDINATOR, CommLedger, Message, MessageTag, TraceRecord
from ..utils.exceptions import ConfigurationError, UnknownAgent

logger = logging.getLogger(__name__)

VARIANT_ALIASES = {
    "standard": "standard",
    "condensed": "condensed",
    "condensed-exact": "condensed",
    "aladin-cg": "cg",
    "bilevel-cg": "cg",
    "aladin-admm": "admm",
    "bilevel-admm": "admm",
}


class NetworkSimulator:
    """Доставка сообщений раундами и журнал коммуникаций

    Все сообщения раунда доставляются атомарно в порядке (from, to, tag).
    Журнал ведётся накопительно и отдельно для текущей внешней итерации.
    """

    def __init__(self, n_agents: int, record_trace: bool = True):
        if n_agents < 1:
            raise ConfigurationError("Network needs at least one agent")
        self.n_agents = n_agents
        self.record_trace = record_trace
        self.round = 0
        self.ledger = CommLedger()
        self.iteration_ledger = CommLedger()
        self.trace: List[TraceRecord] = []

    def _check_endpoint(self, agent: int) -> None:
        if agent != COORDINATOR and not 0 <= agent < self.n_agents:
            raise UnknownAgent(agent)

    def round_exchange(self, outbox: Iterable[Message]) -> Dict[int, List[Message]]:
        """Доставляет сообщения раунда и возвращает входящие по получателям"""
        messages = list(outbox)
        for message in messages:
            self._check_endpoint(message.sender)
            self._check_endpoint(message.receiver)

        inbox: Dict[int, List[Message]] = {i: [] for i in range(self.n_agents)}
        inbox[COORDINATOR] = []
        if not messages:
            return inbox

        for message in sorted(messages, key=lambda m: (m.sender, m.receiver, m.tag.value)):
            self.ledger.charge(message.tag, message.length)
            self.iteration_ledger.charge(message.tag, message.length)
            if self.record_trace:
                self.trace.append(
                    TraceRecord(
                        round=self.round,
                        sender=message.sender,
                        receiver=message.receiver,
                        tag=message.tag,
                        length=message.length,
                    )
                )
            inbox[message.receiver].append(message)
        self.round += 1
        return inbox

    def ring_sum(self, values: Sequence[float], tag: MessageTag = MessageTag.INNER_GLOBAL) -> float:
        """Глобальная сумма передачей по кольцу 0 -> 1 -> ... -> N-1 -> 0

        Порядок сложения фиксирован, результат воспроизводим побитово.
        """
        if len(values) != self.n_agents:
            raise ValueError(f"ring_sum expects {self.n_agents} values, got {len(values)}")
        total = 0.0
        for agent in range(self.n_agents):
            total += float(values[agent])
            self.round_exchange(
                [
                    Message(
                        sender=agent,
                        receiver=(agent + 1) % self.n_agents,
                        payload=[total],
                        tag=tag,
                    )
                ]
            )
        return total

    def start_iteration(self) -> None:
        self.iteration_ledger = CommLedger()

    def iteration_delta(self) -> CommLedger:
        return self.iteration_ledger.model_copy()

    def trace_lines(self) -> List[str]:
        return [record.to_line() for record in self.trace]


def expected_counts(
    variant: str,
    n_c: int,
    n_agents: int,
    n_cg: int = 0,
    n_ad: int = 0,
    dims: Optional[Sequence[int]] = None,
    n_eq: Optional[Sequence[int]] = None,
    row_degrees: Optional[Sequence[int]] = None,
    n_checks: int = 0,
) -> CommLedger:
    """Замкнутые формулы числа переданных чисел за одну внешнюю итерацию

    Без row_degrees каждая строка считается 2-назначенной. Для варианта
    standard forward_global является нижней оценкой.
    """
    try:
        kind = VARIANT_ALIASES[variant]
    except KeyError:
        raise ConfigurationError(f"Unknown variant for communication counts: {variant}")

    degrees = list(row_degrees) if row_degrees is not None else [2] * n_c
    if len(degrees) != n_c:
        raise ConfigurationError("row_degrees must give one degree per consensus row")
    ledger = CommLedger()

    if kind == "condensed":
        ledger.forward_global = sum(d * (n_c - j) for j, d in enumerate(degrees))
        ledger.forward_rhs = sum(degrees)
        ledger.backward = sum(degrees)
    elif kind == "standard":
        if dims is None:
            raise ConfigurationError("standard variant counts need agent dimensions")
        eqs = list(n_eq) if n_eq is not None else [0] * len(dims)
        ledger.forward_global = sum((n + m) * (n + m + 1) // 2 for n, m in zip(dims, eqs))
        ledger.forward_rhs = sum(dims)
        ledger.backward = sum(dims) + sum(degrees)
    elif kind == "cg":
        pairs = sum(d * (d - 1) for d in degrees)
        ledger.local_prep = pairs * n_c
        ledger.local_init = sum(2 * (d - 1) for d in degrees)
        ledger.global_init = n_agents
        ledger.local_iter = sum(2 * (d - 1) for d in degrees) * n_cg
        ledger.global_iter = 2 * n_agents * n_cg
    else:
        ledger.local_iter = sum(d * (d - 1) for d in degrees) * n_ad + sum(d - 1 for d in degrees) * n_checks
        ledger.global_iter = n_agents * n_checks
    return ledger
