"""Самопроверка задачи: формы матриц и производные конечными разностями"""

import logging
from typing import Callable, List, Optional

import numpy as np

from ..config import Settings, settings as default_settings
from ..models.nlp import AgentProblem, ConsistencyViolation, PartitionedNlp

logger = logging.getLogger(__name__)


def _central_jacobian(fun: Callable, x: np.ndarray, step: float) -> np.ndarray:
    columns = []
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = step
        columns.append((np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2.0 * step))
    return np.column_stack(columns)


def _compare(
    agent_index: int,
    kind: str,
    analytic: np.ndarray,
    reference: np.ndarray,
    tolerance: float,
) -> Optional[ConsistencyViolation]:
    analytic = np.asarray(analytic, dtype=float).reshape(reference.shape)
    if not np.all(np.isfinite(analytic)):
        return ConsistencyViolation(agent=agent_index, kind="non-finite", detail=f"{kind} is not finite")
    error = float(np.max(np.abs(analytic - reference), initial=0.0))
    scale = float(np.max(np.abs(reference), initial=0.0))
    if error <= tolerance * max(1.0, scale):
        return None
    return ConsistencyViolation(
        agent=agent_index,
        kind=kind,
        detail=f"{kind} differs from central finite differences by {error:.3e}",
        max_relative_error=error / max(scale, 1e-12),
    )


def _sample_points(agent: AgentProblem, rng: np.random.Generator, count: int) -> List[np.ndarray]:
    if agent.lower is not None and agent.upper is not None:
        return [rng.uniform(agent.lower, agent.upper) for _ in range(count)]
    return [agent.x0 + rng.normal(scale=0.5, size=agent.dim) for _ in range(count)]


def _check_agent(
    index: int, agent: AgentProblem, rng: np.random.Generator, config: Settings
) -> List[ConsistencyViolation]:
    violations: List[ConsistencyViolation] = []
    step, tolerance = config.fd_step, config.fd_tolerance

    for x in _sample_points(agent, rng, config.fd_samples):
        values = [np.atleast_1d(agent.objective(x)), agent.h(x), agent.g(x)]
        if not all(np.all(np.isfinite(v)) for v in values):
            violations.append(
                ConsistencyViolation(agent=index, kind="non-finite", detail="evaluation is not finite")
            )
            continue

        checks = [
            ("gradient", agent.gradient(x), _central_jacobian(agent.objective, x, step).ravel()),
            ("hessian", agent.hessian(x), _central_jacobian(agent.gradient, x, step)),
        ]
        if agent.n_ineq:
            checks.append(("ineq_jacobian", agent.dh(x), _central_jacobian(agent.h, x, step)))
            if agent.ineq_hessian is not None:
                kappa = rng.uniform(0.5, 1.5, size=agent.n_ineq)
                checks.append(
                    (
                        "ineq_hessian",
                        agent.ineq_hessian(x, kappa),
                        _central_jacobian(lambda y: agent.dh(y).T @ kappa, x, step),
                    )
                )
        if agent.n_eq:
            checks.append(("eq_jacobian", agent.dg(x), _central_jacobian(agent.g, x, step)))
            if agent.eq_hessian is not None:
                kappa_eq = rng.uniform(-1.0, 1.0, size=agent.n_eq)
                checks.append(
                    (
                        "eq_hessian",
                        agent.eq_hessian(x, kappa_eq),
                        _central_jacobian(lambda y: agent.dg(y).T @ kappa_eq, x, step),
                    )
                )

        for kind, analytic, reference in checks:
            violation = _compare(index, kind, analytic, reference, tolerance)
            if violation is not None:
                violations.append(violation)

    # Одна запись на агента и вид нарушения, с наибольшей ошибкой
    worst = {}
    for violation in violations:
        current = worst.get(violation.kind)
        if current is None or (violation.max_relative_error or 0.0) > (current.max_relative_error or 0.0):
            worst[violation.kind] = violation
    return list(worst.values())


def validate_consistency(
    nlp: PartitionedNlp, config: Optional[Settings] = None, seed: int = 0
) -> List[ConsistencyViolation]:
    """Возвращает список нарушений; пустой список означает, что задача согласована"""
    config = config or default_settings
    report: List[ConsistencyViolation] = []

    if len(nlp.coupling) != len(nlp.agents):
        report.append(
            ConsistencyViolation(
                kind="shape",
                detail=f"{len(nlp.coupling)} coupling matrices for {len(nlp.agents)} agents",
            )
        )
    for i, (agent, a_i) in enumerate(zip(nlp.agents, nlp.coupling)):
        a_i = np.atleast_2d(np.asarray(a_i))
        if a_i.shape != (nlp.n_c, agent.dim):
            report.append(
                ConsistencyViolation(
                    agent=i,
                    kind="shape",
                    detail=f"A_{i} has shape {a_i.shape}, expected ({nlp.n_c}, {agent.dim})",
                )
            )

    rng = np.random.default_rng(seed)
    for i, agent in enumerate(nlp.agents):
        report.extend(_check_agent(i, agent, rng, config))

    for violation in report:
        logger.warning(f"Consistency violation: agent={violation.agent} {violation.detail}")
    return report
