"""Назначение строк консенсуса агентам и переформулировка в 2-назначенную форму"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from ..models.nlp import AgentProblem, AssignmentMap, PartitionedNlp
from ..utils.exceptions import OrphanConsensusRowError

logger = logging.getLogger(__name__)


def build_assignment(nlp: PartitionedNlp) -> AssignmentMap:
    """R(j) = агенты с ненулевой строкой j в A_i, C(i) - обратное отношение"""
    r_assigned: List[Tuple[int, ...]] = []
    for j in range(nlp.n_c):
        agents = tuple(
            i for i, a_i in enumerate(nlp.coupling) if np.any(a_i[j] != 0.0)
        )
        if not agents:
            raise OrphanConsensusRowError(j)
        r_assigned.append(agents)

    c_assigned = [
        tuple(j for j, agents in enumerate(r_assigned) if i in agents)
        for i in range(nlp.n_agents)
    ]
    return AssignmentMap(r_assigned=r_assigned, c_assigned=c_assigned)


def _pad_matrix(matrix: np.ndarray, dim: int) -> np.ndarray:
    padded = np.zeros((dim, dim))
    n = matrix.shape[0]
    padded[:n, :n] = matrix
    return padded


def _pad_columns(matrix: np.ndarray, dim: int) -> np.ndarray:
    padded = np.zeros((matrix.shape[0], dim))
    padded[:, : matrix.shape[1]] = matrix
    return padded


def _with_copies(agent: AgentProblem, copy_x0: List[np.ndarray]) -> AgentProblem:
    """Дописывает к вектору агента копии чужих переменных с нулевым весом"""
    n = agent.dim
    dim = n + sum(x.size for x in copy_x0)

    def objective(x):
        return agent.objective(x[:n])

    def gradient(x):
        grad = np.zeros(dim)
        grad[:n] = agent.gradient(x[:n])
        return grad

    def hessian(x):
        return _pad_matrix(np.asarray(agent.hessian(x[:n]), dtype=float).reshape(n, n), dim)

    fields = dict(
        name=f"{agent.name}+copies",
        dim=dim,
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        x0=np.concatenate([agent.x0] + list(copy_x0)),
        metadata={**agent.metadata, "copied_dim": dim - n},
    )

    if agent.n_ineq:
        fields.update(
            n_ineq=agent.n_ineq,
            ineq=lambda x: agent.h(x[:n]),
            ineq_jacobian=lambda x: _pad_columns(agent.dh(x[:n]), dim),
        )
        if agent.ineq_hessian is not None:
            fields["ineq_hessian"] = lambda x, k: _pad_matrix(
                np.asarray(agent.ineq_hessian(x[:n], k), dtype=float), dim
            )
    if agent.n_eq:
        fields.update(
            n_eq=agent.n_eq,
            eq=lambda x: agent.g(x[:n]),
            eq_jacobian=lambda x: _pad_columns(agent.dg(x[:n]), dim),
        )
        if agent.eq_hessian is not None:
            fields["eq_hessian"] = lambda x, k: _pad_matrix(
                np.asarray(agent.eq_hessian(x[:n], k), dtype=float), dim
            )
    if agent.lower is not None and agent.upper is not None:
        # Копии исследуются в той же области, что и стартовая точка
        spread = np.concatenate(copy_x0) if copy_x0 else np.zeros(0)
        fields["lower"] = np.concatenate([agent.lower, spread - 1.0])
        fields["upper"] = np.concatenate([agent.upper, spread + 1.0])
    return AgentProblem(**fields)


def reformulate_two_assigned(nlp: PartitionedNlp) -> PartitionedNlp:
    """Сводит задачу к 2-назначенной форме дублированием переменных

    Для строки j с R(j) = (i_0, ..., i_m), m >= 2, переменные промежуточных
    агентов копируются в агента i_0, строка j переписывается на копии, а
    новые строки (0 I) x̃_{i_0} - I x_k = 0 связывают копии с оригиналами.
    """
    assignment = build_assignment(nlp)
    if assignment.assignment_degree <= 2:
        return nlp

    dims = nlp.dims
    copies: Dict[int, List[int]] = {}
    for agents in assignment.r_assigned:
        if len(agents) > 2:
            lowest = agents[0]
            for k in agents[1:-1]:
                if k not in copies.setdefault(lowest, []):
                    copies[lowest].append(k)

    # Смещения копий внутри расширенного вектора агента
    offsets: Dict[Tuple[int, int], int] = {}
    new_dims = list(dims)
    for owner, copied in copies.items():
        for k in copied:
            offsets[(owner, k)] = new_dims[owner]
            new_dims[owner] += dims[k]

    extra_rows = sum(dims[k] for copied in copies.values() for k in copied)
    n_c = nlp.n_c + extra_rows
    coupling = [np.zeros((n_c, n)) for n in new_dims]

    for j, agents in enumerate(assignment.r_assigned):
        middles = agents[1:-1] if len(agents) > 2 else ()
        for i in agents:
            row = nlp.coupling[i][j]
            if i in middles:
                start = offsets[(agents[0], i)]
                coupling[agents[0]][j, start : start + dims[i]] = row
            else:
                coupling[i][j, : dims[i]] = row

    row = nlp.n_c
    for owner, copied in copies.items():
        for k in copied:
            start = offsets[(owner, k)]
            for t in range(dims[k]):
                coupling[owner][row, start + t] = 1.0
                coupling[k][row, t] = -1.0
                row += 1

    agents = [
        _with_copies(agent, [nlp.agents[k].x0 for k in copies[i]]) if i in copies else agent
        for i, agent in enumerate(nlp.agents)
    ]
    logger.info(
        f"Reformulated {nlp.name}: degree {assignment.assignment_degree} -> 2, "
        f"{extra_rows} copy rows added"
    )
    return PartitionedNlp(
        name=nlp.name,
        agents=agents,
        coupling=coupling,
        n_c=n_c,
        original_dims=nlp.original_dims or dims,
    )
