"""Встроенные тестовые задачи и эталонные решения"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from ..models.nlp import AgentProblem, PartitionedNlp
from ..models.problems import QuarticToyParams, RandomQpParams, RobotOcpConfig
from ..utils.exceptions import ConfigurationError, InfeasibleConfig

logger = logging.getLogger(__name__)


# Четвёртая степень с консенсусом


def _quartic_agent(index: int, c: float, a: float, lower: float, upper: float, x0: float) -> AgentProblem:
    return AgentProblem(
        name=f"quartic-{index}",
        dim=1,
        objective=lambda x: float(0.25 * (x[0] - c) ** 4 + a * x[0] ** 2),
        gradient=lambda x: np.array([(x[0] - c) ** 3 + 2.0 * a * x[0]]),
        hessian=lambda x: np.array([[3.0 * (x[0] - c) ** 2 + 2.0 * a]]),
        n_ineq=2,
        ineq=lambda x: np.array([x[0] - upper, lower - x[0]]),
        ineq_jacobian=lambda x: np.array([[1.0], [-1.0]]),
        ineq_hessian=lambda x, kappa: np.zeros((1, 1)),
        x0=[x0],
        lower=[lower],
        upper=[upper],
        metadata={"c": c, "a": a},
    )


def make_quartic_toy(params: Optional[QuarticToyParams] = None) -> PartitionedNlp:
    """Невыпуклая скалярная задача консенсуса с ограничениями-отрезками"""
    params = params or QuarticToyParams()
    n = params.n_agents
    x0 = params.x0 or [min(max(c, params.lower), params.upper) for c in params.c]
    agents = [
        _quartic_agent(i, params.c[i], params.a[i], params.lower, params.upper, x0[i])
        for i in range(n)
    ]

    if params.coupling is not None:
        rows = np.asarray(params.coupling, dtype=float)
    else:
        rows = np.zeros((n - 1, n))
        for k in range(1, n):
            rows[k - 1, 0] = 1.0
            rows[k - 1, k] = -1.0
    coupling = [rows[:, [i]] for i in range(n)]
    return PartitionedNlp(name="quartic_toy", agents=agents, coupling=coupling, n_c=rows.shape[0])


def quartic_grid_minimizer(params: Optional[QuarticToyParams] = None, step: float = 1e-6) -> float:
    """Минимум Σ f_i(x) при x_1 = ... = x_N перебором по сетке"""
    params = params or QuarticToyParams()
    grid = np.arange(params.lower, params.upper + 0.5 * step, step)
    total = np.zeros_like(grid)
    for c, a in zip(params.c, params.a):
        total += 0.25 * (grid - c) ** 4 + a * grid**2
    return float(grid[int(np.argmin(total))])


# Случайные выпуклые QP


def make_random_consensus_qp(params: Optional[RandomQpParams] = None, seed: int = 0) -> PartitionedNlp:
    """Выпуклые квадратичные агенты, каждая строка связи ровно у двух агентов"""
    params = params or RandomQpParams()
    rng = np.random.default_rng(params.seed if params.seed is not None else seed)
    dims = params.agent_dims

    agents = []
    for i, n in enumerate(dims):
        basis, _ = np.linalg.qr(rng.normal(size=(n, n)))
        spectrum = np.logspace(0.0, np.log10(params.condition), n)
        Q = (basis * spectrum) @ basis.T
        Q = 0.5 * (Q + Q.T)
        q = rng.normal(size=n)
        E = rng.normal(size=(params.n_eq, n))
        e = rng.normal(size=params.n_eq)

        fields: Dict[str, Any] = dict(
            name=f"qp-{i}",
            dim=n,
            objective=lambda x, Q=Q, q=q: float(0.5 * x @ Q @ x + q @ x),
            gradient=lambda x, Q=Q, q=q: Q @ x + q,
            hessian=lambda x, Q=Q: Q,
            x0=np.zeros(n),
            lower=-np.ones(n),
            upper=np.ones(n),
            metadata={"Q": Q, "q": q, "E": E, "e": e},
        )
        if params.n_eq:
            fields.update(
                n_eq=params.n_eq,
                eq=lambda x, E=E, e=e: E @ x - e,
                eq_jacobian=lambda x, E=E: E,
                eq_hessian=lambda x, kappa, n=n: np.zeros((n, n)),
            )
        agents.append(AgentProblem(**fields))

    coupling = [np.zeros((params.n_c, n)) for n in dims]
    for j in range(params.n_c):
        pair = sorted(rng.choice(params.n_agents, size=2, replace=False))
        for i in pair:
            coupling[i][j] = rng.normal(size=dims[i])
    return PartitionedNlp(name="random_qp", agents=agents, coupling=coupling, n_c=params.n_c)


def random_qp_solution(nlp: PartitionedNlp) -> Tuple[List[np.ndarray], np.ndarray]:
    """Эталон: одно решение плотной KKT системы, возвращает (x_i, λ)"""
    dims = nlp.dims
    n_eq = [agent.metadata["E"].shape[0] for agent in nlp.agents]
    n_total = sum(dims)
    size = n_total + sum(n_eq) + nlp.n_c
    kkt = np.zeros((size, size))
    rhs = np.zeros(size)

    x_start = np.cumsum([0] + dims[:-1])
    e_start = n_total + np.cumsum([0] + n_eq[:-1])
    lam_rows = slice(n_total + sum(n_eq), size)
    for i, agent in enumerate(nlp.agents):
        xs = slice(x_start[i], x_start[i] + dims[i])
        es = slice(e_start[i], e_start[i] + n_eq[i])
        kkt[xs, xs] = agent.metadata["Q"]
        kkt[xs, es] = agent.metadata["E"].T
        kkt[es, xs] = agent.metadata["E"]
        kkt[xs, lam_rows] = nlp.coupling[i].T
        kkt[lam_rows, xs] = nlp.coupling[i]
        rhs[xs] = -agent.metadata["q"]
        rhs[es] = agent.metadata["e"]
    solution = np.linalg.solve(kkt, rhs)
    xs = [solution[x_start[i] : x_start[i] + dims[i]] for i in range(nlp.n_agents)]
    return xs, solution[lam_rows]


# Два робота с ограничением на расстояние


class _RobotLayout:
    """Индексы переменных робота: [состояния 3K | управления 2K | копии (x, y) соседа 2K]"""

    def __init__(self, knots: int):
        self.knots = knots
        self.dim = 7 * knots

    def state(self, k: int, c: int) -> int:
        return 3 * k + c

    def control(self, k: int, c: int) -> int:
        return 3 * self.knots + 2 * k + c

    def copy(self, k: int, c: int) -> int:
        return 5 * self.knots + 2 * k + c


def _robot_agent(
    index: int,
    cfg: RobotOcpConfig,
    layout: _RobotLayout,
    x0: np.ndarray,
) -> AgentProblem:
    K, dt, d = layout.knots, cfg.step, cfg.min_distance
    start = np.asarray(cfg.starts[index], dtype=float)
    target = np.asarray(cfg.targets[index], dtype=float)
    Q = np.asarray(cfg.q_weights, dtype=float)
    R = np.asarray(cfg.r_weights, dtype=float)

    states = np.array([[layout.state(k, c) for c in range(3)] for k in range(K)])
    controls = np.array([[layout.control(k, c) for c in range(2)] for k in range(K)])
    copies = np.array([[layout.copy(k, c) for c in range(2)] for k in range(K)])

    def objective(x):
        z, u = x[states], x[controls]
        return float(dt * (np.sum(Q * (z - target) ** 2) + np.sum(R * u**2)))

    def gradient(x):
        grad = np.zeros(layout.dim)
        grad[states] = 2.0 * dt * Q * (x[states] - target)
        grad[controls] = 2.0 * dt * R * x[controls]
        return grad

    hessian_diag = np.zeros(layout.dim)
    hessian_diag[states] = 2.0 * dt * Q
    hessian_diag[controls] = 2.0 * dt * R

    def hessian(x):
        return np.diag(hessian_diag)

    # Динамика по неявной схеме Эйлера и терминальные равенства
    def eq(x):
        z, u = x[states], x[controls]
        previous = np.vstack([start, z[:-1]])
        theta, v, omega = z[:, 2], u[:, 0], u[:, 1]
        dynamics = z - previous - dt * np.column_stack([v * np.cos(theta), v * np.sin(theta), omega])
        terminal = z[-1, :2] - target[:2]
        return np.concatenate([dynamics.ravel(), terminal])

    def eq_jacobian(x):
        jac = np.zeros((3 * K + 2, layout.dim))
        for k in range(K):
            theta, v = x[states[k, 2]], x[controls[k, 0]]
            rows = 3 * k + np.arange(3)
            jac[rows, states[k]] = 1.0
            if k:
                jac[rows, states[k - 1]] = -1.0
            jac[rows[0], states[k, 2]] += dt * v * np.sin(theta)
            jac[rows[1], states[k, 2]] -= dt * v * np.cos(theta)
            jac[rows[0], controls[k, 0]] = -dt * np.cos(theta)
            jac[rows[1], controls[k, 0]] = -dt * np.sin(theta)
            jac[rows[2], controls[k, 1]] = -dt
        jac[3 * K, states[-1, 0]] = 1.0
        jac[3 * K + 1, states[-1, 1]] = 1.0
        return jac

    def eq_hessian(x, kappa):
        hess = np.zeros((layout.dim, layout.dim))
        for k in range(K):
            theta, v = x[states[k, 2]], x[controls[k, 0]]
            kx, ky = kappa[3 * k], kappa[3 * k + 1]
            t, w = states[k, 2], controls[k, 0]
            hess[t, t] += dt * v * (kx * np.cos(theta) + ky * np.sin(theta))
            cross = dt * (kx * np.sin(theta) - ky * np.cos(theta))
            hess[t, w] += cross
            hess[w, t] += cross
        return hess

    # d² - ‖p_k - копия_k‖² <= 0
    def ineq(x):
        diff = x[states[:, :2]] - x[copies]
        return d**2 - np.sum(diff**2, axis=1)

    def ineq_jacobian(x):
        jac = np.zeros((K, layout.dim))
        diff = x[states[:, :2]] - x[copies]
        for k in range(K):
            jac[k, states[k, :2]] = -2.0 * diff[k]
            jac[k, copies[k]] = 2.0 * diff[k]
        return jac

    def ineq_hessian(x, kappa):
        hess = np.zeros((layout.dim, layout.dim))
        for k in range(K):
            for c in range(2):
                p, q = states[k, c], copies[k, c]
                hess[p, p] -= 2.0 * kappa[k]
                hess[q, q] -= 2.0 * kappa[k]
                hess[p, q] += 2.0 * kappa[k]
                hess[q, p] += 2.0 * kappa[k]
        return hess

    return AgentProblem(
        name=f"robot-{index}",
        dim=layout.dim,
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        n_ineq=K,
        ineq=ineq,
        ineq_jacobian=ineq_jacobian,
        ineq_hessian=ineq_hessian,
        n_eq=3 * K + 2,
        eq=eq,
        eq_jacobian=eq_jacobian,
        eq_hessian=eq_hessian,
        x0=x0,
        lower=x0 - 1.0,
        upper=x0 + 1.0,
        metadata={"start": start, "target": target, "knots": K},
    )


def _straight_line(start: np.ndarray, target: np.ndarray, knots: int) -> np.ndarray:
    fractions = np.arange(1, knots + 1)[:, None] / knots
    return start + fractions * (target - start)


def make_robot_ocp(cfg: Optional[RobotOcpConfig] = None) -> PartitionedNlp:
    """Два робота, копии (x, y) соседа и связь копий с оригиналами"""
    cfg = cfg or RobotOcpConfig()
    starts = np.asarray(cfg.starts, dtype=float)
    targets = np.asarray(cfg.targets, dtype=float)
    for label, poses in (("start", starts), ("target", targets)):
        distance = float(np.linalg.norm(poses[0, :2] - poses[1, :2]))
        if distance < cfg.min_distance:
            raise InfeasibleConfig(
                f"Robots are {distance:.3f} m apart at {label}, minimum is {cfg.min_distance} m"
            )

    K = cfg.knots
    layout = _RobotLayout(K)
    lines = [_straight_line(starts[i], targets[i], K) for i in range(2)]

    agents = []
    for i in range(2):
        x0 = np.zeros(layout.dim)
        x0[: 3 * K] = lines[i].ravel()
        x0[5 * K :] = lines[1 - i][:, :2].ravel()
        agents.append(_robot_agent(i, cfg, layout, x0))

    # Строки 0..2K-1: копия робота 1 у робота 0, строки 2K..4K-1: наоборот
    n_c = 4 * K
    coupling = [np.zeros((n_c, layout.dim)) for _ in range(2)]
    for owner in range(2):
        other = 1 - owner
        for k in range(K):
            for c in range(2):
                row = owner * 2 * K + 2 * k + c
                coupling[owner][row, layout.copy(k, c)] = 1.0
                coupling[other][row, layout.state(k, c)] = -1.0

    logger.info(f"Robot OCP: {K} knots, dimension {layout.dim} per robot, {n_c} consensus rows")
    return PartitionedNlp(name="robot_ocp", agents=agents, coupling=coupling, n_c=n_c)


def robot_feasibility(nlp: PartitionedNlp, xs: List[np.ndarray]) -> Dict[str, float]:
    """Минимальное расстояние между роботами и ошибка терминальных условий"""
    K = nlp.agents[0].metadata["knots"]
    positions = []
    terminal_error = 0.0
    for agent, x in zip(nlp.agents, xs):
        z = x[: 3 * K].reshape(K, 3)
        positions.append(z[:, :2])
        terminal_error = max(terminal_error, float(np.max(np.abs(z[-1, :2] - agent.metadata["target"][:2]))))
    distance = np.linalg.norm(positions[0] - positions[1], axis=1)
    return {
        "min_distance": float(distance.min()),
        "terminal_error": terminal_error,
    }


def build_problem(name: str, params: Optional[Dict[str, Any]] = None, seed: int = 0) -> PartitionedNlp:
    """Строит задачу сценария по имени и словарю параметров"""
    params = dict(params or {})
    try:
        if name == "quartic_toy":
            return make_quartic_toy(QuarticToyParams(**params))
        if name == "random_qp":
            return make_random_consensus_qp(RandomQpParams(**params), seed=seed)
        if name == "robot_ocp":
            if params.pop("preset", None) == "long":
                base = RobotOcpConfig.long_horizon().model_dump()
                base.update(params)
                params = base
            return make_robot_ocp(RobotOcpConfig(**params))
    except ValidationError as e:
        raise ConfigurationError(f"Invalid parameters for {name}: {e}")
    raise ConfigurationError(f"Unknown problem: {name}")
