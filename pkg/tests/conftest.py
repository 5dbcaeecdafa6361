"""Общие фикстуры тестов"""

from typing import List, Tuple

import numpy as np
import pytest

from aladin.config import Settings
from aladin.models.nlp import AssignmentMap, PartitionedNlp
from aladin.models.problems import QuarticToyParams, RandomQpParams
from aladin.models.run import RunConfig
from aladin.models.sensitivities import AgentSensitivities, CondensedContribution
from aladin.services.assignment import build_assignment
from aladin.services.local_solver import augment_mu, condense, make_sensitivities
from aladin.services.problems import make_quartic_toy, make_random_consensus_qp


@pytest.fixture
def settings() -> Settings:
    return Settings(log_level="WARNING")


@pytest.fixture
def quartic_nlp() -> PartitionedNlp:
    return make_quartic_toy()


@pytest.fixture
def three_assigned_quartic_params() -> QuarticToyParams:
    """Три агента, строка x_1 + x_2 - 2x_3 = 0 назначена всем трём"""
    return QuarticToyParams(
        c=[1.0, -1.0, 0.5],
        a=[-0.5, 1.0, 0.25],
        coupling=[[1.0, -1.0, 0.0], [1.0, 1.0, -2.0]],
    )


@pytest.fixture
def quartic_config() -> RunConfig:
    return RunConfig(name="quartic", problem="quartic_toy", variant="condensed-exact")


def qp_point(
    nlp: PartitionedNlp, rng: np.random.Generator
) -> Tuple[List[AgentSensitivities], List[np.ndarray]]:
    """Чувствительности случайной QP в случайной точке, активны только равенства"""
    sens, xs = [], []
    for i, agent in enumerate(nlp.agents):
        x = rng.normal(size=agent.dim)
        Q, q, E = agent.metadata["Q"], agent.metadata["q"], agent.metadata["E"]
        sens.append(
            make_sensitivities(
                i,
                x,
                Q,
                Q @ x + q,
                c_act=E,
                reg_floor=1e-8,
                multipliers=rng.normal(size=E.shape[0]),
                n_eq=E.shape[0],
            )
        )
        xs.append(x)
    return sens, xs


def qp_contributions(
    nlp: PartitionedNlp, sens: List[AgentSensitivities], mu: float, lam: np.ndarray
) -> Tuple[List[CondensedContribution], AssignmentMap]:
    assignment = build_assignment(nlp)
    contribs = [
        augment_mu(condense(s, a_i, s.x), mu, lam, assignment, i)
        for i, (s, a_i) in enumerate(zip(sens, nlp.coupling))
    ]
    return contribs, assignment


def random_qp(seed: int, n_agents: int = 3, dims: int = 5, n_c: int = 6, n_eq: int = 1) -> PartitionedNlp:
    return make_random_consensus_qp(
        RandomQpParams(n_agents=n_agents, dims=dims, n_c=n_c, n_eq=n_eq), seed=seed
    )


def random_two_assigned_system(
    rng: np.random.Generator,
    n_agents: int,
    n_c: int,
    mu: float = 1e6,
    single_rows: int = 0,
) -> Tuple[List[CondensedContribution], AssignmentMap]:
    """Хорошо обусловленная 2-назначенная система Σ S̃_i λ = Σ s̃_i

    Блок S_i живёт только на строках C(i); первые single_rows строк
    назначены одному агенту.
    """
    r_assigned = []
    for j in range(n_c):
        if j < single_rows:
            r_assigned.append((int(rng.integers(n_agents)),))
        else:
            r_assigned.append(tuple(sorted(int(i) for i in rng.choice(n_agents, size=2, replace=False))))
    c_assigned = [tuple(j for j, agents in enumerate(r_assigned) if i in agents) for i in range(n_agents)]
    assignment = AssignmentMap(r_assigned=r_assigned, c_assigned=c_assigned)

    lam = rng.normal(size=n_c)
    contribs = []
    for i in range(n_agents):
        idx = np.asarray(c_assigned[i], dtype=int)
        S = np.zeros((n_c, n_c))
        s = np.zeros(n_c)
        if idx.size:
            B = rng.normal(size=(idx.size, idx.size)) / np.sqrt(idx.size)
            S[np.ix_(idx, idx)] = 0.5 * B @ B.T + 0.5 * np.eye(idx.size)
            s[idx] = rng.normal(size=idx.size)
        contrib = CondensedContribution(agent=i, S=S, s=s, assigned_rows=c_assigned[i])
        contribs.append(augment_mu(contrib, mu, lam, assignment, i))
    return contribs, assignment
