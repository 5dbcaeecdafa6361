"""Децентрализованный метод сопряжённых градиентов для Σ S̃_i λ = Σ s̃_i

Строку j ведёт агент с наименьшим индексом в R(j) (владелец), второй
назначенный агент (зеркало) знает λ_j и p_j и присылает владельцу
частичные произведения по своим строкам. Скалярные произведения
собираются двумя суммами по кольцу на итерацию.
"""

import logging
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..models.coordination import CoordinationResult, InexactnessMode
from ..models.network import Message, MessageTag
from ..models.nlp import AssignmentMap
from ..models.sensitivities import CondensedContribution
from ..utils.exceptions import IndefiniteDetected, NotTwoAssigned
from .netsim import NetworkSimulator

logger = logging.getLogger(__name__)


class CgAgentState(BaseModel):
    """Локальное состояние агента в децентрализованном CG"""

    agent: int
    assigned: Tuple[int, ...]
    owned_rows: Tuple[int, ...]
    mirrored_rows: Tuple[int, ...]
    S_tilde: np.ndarray
    s_tilde: np.ndarray
    merged_columns: Dict[int, np.ndarray] = Field(default_factory=dict)
    lam: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True

    @property
    def index(self) -> np.ndarray:
        return np.asarray(self.assigned, dtype=int)


def cg_prepare(
    contribs: Sequence[CondensedContribution],
    assignment: AssignmentMap,
    network: NetworkSimulator,
) -> List[CgAgentState]:
    """Обмен столбцами S̃_i e_j между назначенными агентами строки j"""
    if assignment.assignment_degree > 2:
        raise NotTwoAssigned(assignment.assignment_degree)

    outbox = []
    for j, agents in enumerate(assignment.r_assigned):
        for i in agents:
            for other in agents:
                if other != i:
                    outbox.append(
                        Message(
                            sender=i,
                            receiver=other,
                            payload=contribs[i].S_tilde[:, j],
                            tag=MessageTag.PREP,
                            rows=(j,),
                        )
                    )
    inbox = network.round_exchange(outbox)

    states = []
    for i, contrib in enumerate(contribs):
        owned = assignment.owned_rows(i)
        merged = {j: contrib.S_tilde[:, j].copy() for j in owned}
        for message in inbox[i]:
            (j,) = message.rows
            if j in merged:
                merged[j] = merged[j] + message.payload
        states.append(
            CgAgentState(
                agent=i,
                assigned=assignment.c_assigned[i],
                owned_rows=owned,
                mirrored_rows=tuple(j for j in assignment.c_assigned[i] if j not in owned),
                S_tilde=contrib.S_tilde,
                s_tilde=contrib.s_tilde,
                merged_columns=merged,
            )
        )
    return states


def _send_by_owner(
    states: Sequence[CgAgentState],
    assignment: AssignmentMap,
    network: NetworkSimulator,
    values: Dict[Tuple[int, int], float],
    tag: MessageTag,
) -> Dict[int, float]:
    """Пакетная пересылка значений строк от зеркал владельцам

    values: (агент-отправитель, строка) -> число. Возвращает сумму
    полученных значений по строкам.
    """
    batches: Dict[Tuple[int, int], List[Tuple[int, float]]] = defaultdict(list)
    for (sender, j), value in sorted(values.items()):
        batches[(sender, assignment.owner(j))].append((j, value))

    outbox = [
        Message(
            sender=sender,
            receiver=receiver,
            payload=[v for _, v in items],
            tag=tag,
            rows=tuple(j for j, _ in items),
        )
        for (sender, receiver), items in batches.items()
    ]
    inbox = network.round_exchange(outbox)

    received: Dict[int, float] = defaultdict(float)
    for state in states:
        for message in inbox[state.agent]:
            for j, value in zip(message.rows, message.payload):
                received[j] += float(value)
    return received


def _owned_sum(states: Sequence[CgAgentState], vector_a: str, vector_b: str) -> List[float]:
    sums = []
    for state in states:
        rows = np.asarray(state.owned_rows, dtype=int)
        a, b = getattr(state, vector_a), getattr(state, vector_b)
        sums.append(float(a[rows] @ b[rows]) if rows.size else 0.0)
    return sums


def cg_iterate(
    states: Sequence[CgAgentState],
    assignment: AssignmentMap,
    network: NetworkSimulator,
    lam0: np.ndarray,
    n_iterations: int = 80,
    mode: InexactnessMode = InexactnessMode.FIXED_ITERATIONS,
    target: float = 0.0,
    max_iterations: int = 5000,
    record_history: bool = False,
) -> CoordinationResult:
    """Итерации CG с тёплым стартом λ⁰

    В режиме фиксированных итераций выполняется n_iterations шагов, в
    режиме контроля невязки шаги идут до ‖r‖ <= target или max_iterations.
    Досрочная остановка в обоих режимах при r = 0.
    """
    n_c = assignment.n_c
    lam0 = np.asarray(lam0, dtype=float)
    for state in states:
        state.lam = lam0.copy()
        state.r = np.zeros(n_c)
        state.p = np.zeros(n_c)

    # Начальная невязка: зеркала присылают свой вклад в s̃ - S̃λ⁰
    def local_residual(state: CgAgentState, j: int) -> float:
        idx = state.index
        return float(state.s_tilde[j] - state.S_tilde[j, idx] @ state.lam[idx])

    partial = {
        (state.agent, j): local_residual(state, j) for state in states for j in state.mirrored_rows
    }
    received = _send_by_owner(states, assignment, network, partial, MessageTag.INIT_LOCAL)
    for state in states:
        for j in state.owned_rows:
            state.r[j] = local_residual(state, j) + received.get(j, 0.0)
            state.p[j] = state.r[j]
    _broadcast_p(states, assignment, network, MessageTag.INIT_LOCAL)
    rr = network.ring_sum(_owned_sum(states, "r", "r"), MessageTag.INIT_GLOBAL)

    history: List[Dict[str, Any]] = []
    limit = n_iterations if mode == InexactnessMode.FIXED_ITERATIONS else max_iterations
    iterations = 0

    def done() -> bool:
        if rr == 0.0 or iterations >= limit:
            return True
        return mode == InexactnessMode.RESIDUAL and np.sqrt(rr) <= target

    while not done():
        # Частичные произведения зеркал по строкам вне C(владельца)
        partial = {}
        for state in states:
            for j in state.mirrored_rows:
                owner_rows = set(assignment.c_assigned[assignment.owner(j)])
                idx = np.asarray([i for i in state.assigned if i not in owner_rows], dtype=int)
                partial[(state.agent, j)] = (
                    float(state.S_tilde[j, idx] @ state.p[idx]) if idx.size else 0.0
                )
        received = _send_by_owner(states, assignment, network, partial, MessageTag.INNER_LOCAL)

        q: Dict[int, float] = {}
        for state in states:
            idx = state.index
            for j in state.owned_rows:
                q[j] = float(state.merged_columns[j][idx] @ state.p[idx]) + received.get(j, 0.0)

        pq = network.ring_sum(
            [sum(states[i].p[j] * q[j] for j in states[i].owned_rows) for i in range(len(states))]
        )
        if pq <= 0.0:
            raise IndefiniteDetected(pq, iterations)
        alpha = rr / pq

        for state in states:
            idx = state.index
            state.lam[idx] = state.lam[idx] + alpha * state.p[idx]
            for j in state.owned_rows:
                state.r[j] -= alpha * q[j]

        rr_new = network.ring_sum(_owned_sum(states, "r", "r"))
        beta = rr_new / rr
        for state in states:
            for j in state.owned_rows:
                state.p[j] = state.r[j] + beta * state.p[j]
        _broadcast_p(states, assignment, network, MessageTag.INNER_LOCAL)

        rr = rr_new
        iterations += 1
        if record_history:
            history.append(
                {
                    "iteration": iterations,
                    "alpha": alpha,
                    "beta": beta,
                    "lambda": gather_lambda(states, assignment),
                    "residual": float(np.sqrt(rr)),
                }
            )
        logger.debug(f"CG iteration {iterations}: residual {np.sqrt(rr):.3e}")

    return CoordinationResult(
        lambda_qp=gather_lambda(states, assignment),
        residual_norm=float(np.sqrt(rr)),
        inner_iterations=iterations,
        exact=False,
        history=history,
    )


def _broadcast_p(
    states: Sequence[CgAgentState],
    assignment: AssignmentMap,
    network: NetworkSimulator,
    tag: MessageTag,
) -> None:
    values = {(state.agent, j): float(state.p[j]) for state in states for j in state.owned_rows}
    values = {key: v for key, v in values.items() if assignment.mirrors(key[1])}
    batches: Dict[Tuple[int, int], List[Tuple[int, float]]] = defaultdict(list)
    for (sender, j), value in sorted(values.items()):
        for receiver in assignment.mirrors(j):
            batches[(sender, receiver)].append((j, value))
    outbox = [
        Message(
            sender=sender,
            receiver=receiver,
            payload=[v for _, v in items],
            tag=tag,
            rows=tuple(j for j, _ in items),
        )
        for (sender, receiver), items in batches.items()
    ]
    inbox = network.round_exchange(outbox)
    for state in states:
        for message in inbox[state.agent]:
            for j, value in zip(message.rows, message.payload):
                state.p[j] = float(value)


def gather_lambda(states: Sequence[CgAgentState], assignment: AssignmentMap) -> np.ndarray:
    """Собирает λ по владельцам строк"""
    lam = np.zeros(assignment.n_c)
    for j in range(assignment.n_c):
        lam[j] = states[assignment.owner(j)].lam[j]
    return lam


def centralized_cg(
    matrix: np.ndarray,
    rhs: np.ndarray,
    lam0: np.ndarray,
    n_iterations: int,
) -> Tuple[np.ndarray, List[Dict[str, Any]]]:
    """Классический CG на собранной системе, эталон для децентрализованного"""
    lam = np.asarray(lam0, dtype=float).copy()
    r = rhs - matrix @ lam
    p = r.copy()
    rr = float(r @ r)
    history: List[Dict[str, Any]] = []
    for k in range(n_iterations):
        if rr == 0.0:
            break
        q = matrix @ p
        alpha = rr / float(p @ q)
        lam = lam + alpha * p
        r = r - alpha * q
        rr_new = float(r @ r)
        beta = rr_new / rr
        p = r + beta * p
        rr = rr_new
        history.append(
            {"iteration": k + 1, "alpha": alpha, "beta": beta, "lambda": lam.copy(), "residual": np.sqrt(rr)}
        )
    return lam, history
