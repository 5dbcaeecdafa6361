"""Децентрализованный ADMM в форме консенсуса для Σ S̃_i λ = Σ s̃_i

Каждый агент держит копию λ_i на своих строках C(i), двойственную
переменную γ_i и среднее λ̄ по строкам C(i). Разложение S̃_i + ρI
вычисляется один раз на внешнюю итерацию.
"""

import logging
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import linalg

from ..config import Settings, settings as default_settings
from ..models.coordination import CoordinationResult, InexactnessMode
from ..models.network import Message, MessageTag
from ..models.nlp import AssignmentMap
from ..models.sensitivities import CondensedContribution
from ..utils.exceptions import NotTwoAssigned, SingularLocalSystem
from .netsim import NetworkSimulator

logger = logging.getLogger(__name__)


class AdmmAgentState(BaseModel):
    """Локальное состояние агента в ADMM"""

    agent: int
    assigned: Tuple[int, ...]
    S_tilde: np.ndarray
    s_tilde: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    lam_bar: np.ndarray
    factor: Optional[Any] = None

    class Config:
        arbitrary_types_allowed = True

    @property
    def index(self) -> np.ndarray:
        return np.asarray(self.assigned, dtype=int)


def admm_prepare(
    contribs: Sequence[CondensedContribution],
    assignment: AssignmentMap,
    rho_admm: float,
    lam_bar0: np.ndarray,
) -> List[AdmmAgentState]:
    """Факторизует (S̃_i + ρI) на строках C(i); γ = 0, λ̄ с тёплого старта"""
    if assignment.assignment_degree > 2:
        raise NotTwoAssigned(assignment.assignment_degree)
    if rho_admm <= 0:
        raise ValueError("ADMM step size must be positive")

    states = []
    lam_bar0 = np.asarray(lam_bar0, dtype=float)
    for i, contrib in enumerate(contribs):
        rows = assignment.c_assigned[i]
        idx = np.asarray(rows, dtype=int)
        factor = None
        if idx.size:
            local = contrib.S_tilde[np.ix_(idx, idx)] + rho_admm * np.eye(idx.size)
            try:
                factor = linalg.cho_factor(local)
            except linalg.LinAlgError:
                raise SingularLocalSystem(i)
        states.append(
            AdmmAgentState(
                agent=i,
                assigned=rows,
                S_tilde=contrib.S_tilde,
                s_tilde=contrib.s_tilde,
                lam=lam_bar0.copy(),
                gamma=np.zeros(lam_bar0.size),
                lam_bar=lam_bar0.copy(),
                factor=factor,
            )
        )
    return states


def _exchange_copies(
    states: Sequence[AdmmAgentState],
    assignment: AssignmentMap,
    network: NetworkSimulator,
) -> Dict[int, Dict[int, Dict[int, float]]]:
    """Каждый агент отправляет λ_i,j остальным назначенным агентам строки j"""
    outbox = []
    for state in states:
        for other in assignment.neighbors(state.agent):
            shared = assignment.shared_rows(state.agent, other)
            outbox.append(
                Message(
                    sender=state.agent,
                    receiver=other,
                    payload=state.lam[list(shared)],
                    tag=MessageTag.INNER_LOCAL,
                    rows=shared,
                )
            )
    inbox = network.round_exchange(outbox)

    # received[агент][строка] -> {отправитель: значение}
    received: Dict[int, Dict[int, Dict[int, float]]] = defaultdict(lambda: defaultdict(dict))
    for state in states:
        for message in inbox[state.agent]:
            for j, value in zip(message.rows, message.payload):
                received[state.agent][j][message.sender] = float(value)
    return received


def _distributed_residual(
    states: Sequence[AdmmAgentState],
    assignment: AssignmentMap,
    network: NetworkSimulator,
) -> float:
    """‖S̃λ̄ - s̃‖: зеркала присылают частичные значения владельцам, сумма по кольцу"""
    partial: Dict[Tuple[int, int], float] = {}
    for state in states:
        idx = state.index
        for j in state.assigned:
            partial[(state.agent, j)] = float(
                state.S_tilde[j, idx] @ state.lam_bar[idx] - state.s_tilde[j]
            )

    batches: Dict[Tuple[int, int], List[Tuple[int, float]]] = defaultdict(list)
    for (sender, j), value in sorted(partial.items()):
        owner = assignment.owner(j)
        if sender != owner:
            batches[(sender, owner)].append((j, value))
    inbox = network.round_exchange(
        Message(
            sender=sender,
            receiver=receiver,
            payload=[v for _, v in items],
            tag=MessageTag.INNER_LOCAL,
            rows=tuple(j for j, _ in items),
        )
        for (sender, receiver), items in batches.items()
    )

    squares = []
    for state in states:
        rows = {j: partial[(state.agent, j)] for j in assignment.owned_rows(state.agent)}
        for message in inbox[state.agent]:
            for j, value in zip(message.rows, message.payload):
                rows[j] += float(value)
        squares.append(sum(v * v for _, v in sorted(rows.items())))
    return float(np.sqrt(network.ring_sum(squares)))


def gather_lambda_bar(states: Sequence[AdmmAgentState], assignment: AssignmentMap) -> np.ndarray:
    lam = np.zeros(assignment.n_c)
    for j in range(assignment.n_c):
        lam[j] = states[assignment.owner(j)].lam_bar[j]
    return lam


def admm_iterate(
    states: Sequence[AdmmAgentState],
    assignment: AssignmentMap,
    network: NetworkSimulator,
    rho_admm: float,
    n_iterations: int = 400,
    mode: InexactnessMode = InexactnessMode.FIXED_ITERATIONS,
    target: float = 0.0,
    max_iterations: int = 5000,
    config: Optional[Settings] = None,
) -> CoordinationResult:
    """Итерации ADMM: локальное решение, усреднение по соседям, обновление γ"""
    config = config or default_settings
    contribs_S = sum(state.S_tilde for state in states)
    contribs_s = sum(state.s_tilde for state in states)

    def objective(lam: np.ndarray) -> float:
        return float(0.5 * lam @ contribs_S @ lam - contribs_s @ lam)

    limit = n_iterations if mode == InexactnessMode.FIXED_ITERATIONS else max_iterations
    iterations = 0
    increases = 0
    residual: Optional[float] = None
    reached_target = False
    previous = objective(gather_lambda_bar(states, assignment))

    while iterations < limit:
        for state in states:
            if state.factor is None:
                continue
            idx = state.index
            rhs = state.s_tilde[idx] - state.gamma[idx] + rho_admm * state.lam_bar[idx]
            state.lam[idx] = linalg.cho_solve(state.factor, rhs)

        received = _exchange_copies(states, assignment, network)
        for state in states:
            for j in state.assigned:
                values = dict(received[state.agent][j])
                values[state.agent] = float(state.lam[j])
                ordered = [values[a] for a in assignment.r_assigned[j]]
                state.lam_bar[j] = sum(ordered) / len(ordered)
            idx = state.index
            state.gamma[idx] = state.gamma[idx] + rho_admm * (state.lam[idx] - state.lam_bar[idx])
        iterations += 1

        current = objective(gather_lambda_bar(states, assignment))
        if iterations > config.admm_burn_in and current > previous + 1e-12 * (1.0 + abs(previous)):
            increases += 1
        previous = current

        if mode == InexactnessMode.RESIDUAL and iterations % config.admm_check_every == 0:
            residual = _distributed_residual(states, assignment, network)
            logger.debug(f"ADMM iteration {iterations}: residual {residual:.3e}")
            if residual <= target:
                reached_target = True
                break

    if increases:
        logger.warning(f"ADMM objective increased {increases} times after burn-in")

    lam_bar = gather_lambda_bar(states, assignment)
    if not reached_target:
        residual = float(np.linalg.norm(contribs_S @ lam_bar - contribs_s))
    return CoordinationResult(
        lambda_qp=lam_bar,
        residual_norm=residual,
        inner_iterations=iterations,
        exact=False,
        history=[{"objective": previous, "objective_increases": increases}],
    )
