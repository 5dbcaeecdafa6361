"""Локальный шаг ALADIN: решение NLP агента, чувствительности и конденсация"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy import linalg
from scipy.optimize import BFGS, NonlinearConstraint, minimize

from ..config import Settings, settings as default_settings
from ..models.nlp import AgentProblem, AssignmentMap
from ..models.sensitivities import AgentSensitivities, CondensedContribution, LocalStepResult
from ..utils.exceptions import (
    LocalSolveFailure,
    RankDeficientActiveJacobian,
    SingularReducedHessian,
)

logger = logging.getLogger(__name__)

SigmaLike = Union[float, np.ndarray]


def sigma_matrix(sigma: SigmaLike, dim: int) -> np.ndarray:
    """Σ_i как матрица: число, диагональ или полная матрица"""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 0:
        return float(sigma) * np.eye(dim)
    if sigma.ndim == 1:
        return np.diag(sigma)
    return sigma


def nullspace_basis(c_act: np.ndarray, dim: int) -> np.ndarray:
    """Ортонормированный базис ядра C_act через QR разложение C_actᵀ"""
    rows = c_act.shape[0]
    if rows == 0:
        return np.eye(dim)
    if rows > dim:
        raise RankDeficientActiveJacobian(rows, int(np.linalg.matrix_rank(c_act)))
    q, r, _ = linalg.qr(c_act.T, pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > 1e-10 * max(1.0, diag[0])))
    if rank < rows:
        raise RankDeficientActiveJacobian(rows, rank)
    return q[:, rows:]


def make_sensitivities(
    agent: int,
    x: np.ndarray,
    hessian: np.ndarray,
    gradient: np.ndarray,
    c_act: Optional[np.ndarray] = None,
    reg_floor: Optional[float] = None,
    multipliers: Optional[np.ndarray] = None,
    active_set: Tuple[int, ...] = (),
    n_eq: int = 0,
) -> AgentSensitivities:
    """Собирает AgentSensitivities из готовых производных

    Собственные значения ZᵀHZ отражаются по модулю и ограничиваются снизу reg_floor,
    H корректируется так, что ZᵀHZ совпадает с регуляризованным H̄.
    """
    reg_floor = default_settings.reg_floor if reg_floor is None else reg_floor
    x = np.asarray(x, dtype=float)
    dim = x.size
    hessian = np.asarray(hessian, dtype=float).reshape(dim, dim)
    hessian = 0.5 * (hessian + hessian.T)
    c_act = np.zeros((0, dim)) if c_act is None else np.atleast_2d(np.asarray(c_act, dtype=float))
    if c_act.size == 0:
        c_act = np.zeros((0, dim))

    Z = nullspace_basis(c_act, dim)
    projected = Z.T @ hessian @ Z
    projected = 0.5 * (projected + projected.T)

    factor = None
    if projected.size:
        eigenvalues, vectors = np.linalg.eigh(projected)
        h_bar = (vectors * np.maximum(np.abs(eigenvalues), reg_floor)) @ vectors.T
        h_bar = 0.5 * (h_bar + h_bar.T)
        try:
            factor = linalg.cho_factor(h_bar)
        except linalg.LinAlgError as e:
            raise SingularReducedHessian(f"Reduced Hessian of agent {agent} failed to factor: {e}")
        regularized = hessian + Z @ (h_bar - projected) @ Z.T
        regularized = 0.5 * (regularized + regularized.T)
    else:
        h_bar = projected
        regularized = hessian

    return AgentSensitivities(
        agent=agent,
        x=x,
        H=regularized,
        g=np.asarray(gradient, dtype=float).reshape(dim),
        c_act=c_act,
        Z=Z,
        h_bar=h_bar,
        h_bar_factor=factor,
        active_set=tuple(active_set),
        n_eq=n_eq,
        multipliers=np.zeros(c_act.shape[0]) if multipliers is None else np.asarray(multipliers),
    )


def detect_active_set(agent: AgentProblem, result: LocalStepResult, eps_act: float) -> Tuple[int, ...]:
    """j активно, если h_j(x) > -eps_act; равенства активны всегда и сюда не входят"""
    h = agent.h(result.x)
    return tuple(int(j) for j in np.flatnonzero(h > -eps_act))


def build_sensitivities(
    agent_index: int,
    agent: AgentProblem,
    result: LocalStepResult,
    reg_floor: Optional[float] = None,
) -> AgentSensitivities:
    """H = регуляризованный гессиан лагранжиана, g = ∇f, C_act = активные строки"""
    x = result.x
    active = list(result.active_set)
    c_act = np.vstack([agent.dh(x)[active], agent.dg(x)])
    hessian = agent.lagrangian_hessian(x, result.kappa, result.kappa_eq)
    return make_sensitivities(
        agent_index,
        x,
        hessian,
        agent.gradient(x),
        c_act=c_act,
        reg_floor=reg_floor,
        multipliers=np.concatenate([result.kappa[active], result.kappa_eq]),
        active_set=result.active_set,
        n_eq=agent.n_eq,
    )


def condense(sens: AgentSensitivities, coupling: np.ndarray, x: np.ndarray) -> CondensedContribution:
    """S_i = Ā H̄⁻¹ Āᵀ и s_i = A_i x_i - Ā H̄⁻¹ ḡ"""
    coupling = np.atleast_2d(coupling)
    a_bar = coupling @ sens.Z
    assigned = tuple(int(j) for j in np.flatnonzero(np.any(coupling != 0.0, axis=1)))
    s = coupling @ x
    if sens.nullspace_dim == 0:
        S = np.zeros((coupling.shape[0], coupling.shape[0]))
    else:
        solved = linalg.cho_solve(sens.h_bar_factor, a_bar.T)
        S = a_bar @ solved
        S = 0.5 * (S + S.T)
        s = s - a_bar @ linalg.cho_solve(sens.h_bar_factor, sens.Z.T @ sens.g)
    return CondensedContribution(agent=sens.agent, S=S, s=s, assigned_rows=assigned)


def augment_mu(
    contrib: CondensedContribution,
    mu: float,
    lam: np.ndarray,
    assignment: AssignmentMap,
    agent: int,
) -> CondensedContribution:
    """S̃_i = S_i + Σ_{j∈C(i)} 1/(|R(j)|μ) e_j e_jᵀ, s̃_i = s_i + Σ λ_j/(|R(j)|μ) e_j"""
    S_tilde = contrib.S.copy()
    s_tilde = contrib.s.copy()
    for j in assignment.c_assigned[agent]:
        weight = 1.0 / (len(assignment.r_assigned[j]) * mu)
        S_tilde[j, j] += weight
        s_tilde[j] += weight * lam[j]
    return contrib.model_copy(update={"S_tilde": S_tilde, "s_tilde": s_tilde})


def back_substitute(sens: AgentSensitivities, coupling: np.ndarray, lambda_qp: np.ndarray) -> np.ndarray:
    """Δx_i = Z H̄⁻¹(-Āᵀλ^QP - ḡ)"""
    if sens.nullspace_dim == 0:
        return np.zeros(sens.x.size)
    a_bar = np.atleast_2d(coupling) @ sens.Z
    v = linalg.cho_solve(sens.h_bar_factor, -a_bar.T @ lambda_qp - sens.Z.T @ sens.g)
    return sens.Z @ v


class LocalSolver:
    """Решатель локальной задачи одного агента

    min f_i(x) + λᵀA_i x + ρ/2 ‖x - z_i‖²_Σ  при h_i(x) <= 0, g_i(x) = 0.
    Сначала SLSQP (при неудаче trust-constr), затем уточнение методом
    Ньютона для KKT системы на рабочем множестве до невязки tol_local.
    """

    def __init__(
        self,
        agent_index: int,
        agent: AgentProblem,
        coupling: np.ndarray,
        config: Optional[Settings] = None,
    ):
        self.agent_index = agent_index
        self.agent = agent
        self.coupling = np.atleast_2d(np.asarray(coupling, dtype=float))
        self.config = config or default_settings

    # Функции дополненной задачи

    def _phi(self, x, z, lam, rho, sigma) -> float:
        d = x - z
        return float(self.agent.objective(x) + lam @ (self.coupling @ x) + 0.5 * rho * d @ sigma @ d)

    def _phi_gradient(self, x, z, lam, rho, sigma) -> np.ndarray:
        return (
            np.asarray(self.agent.gradient(x), dtype=float)
            + self.coupling.T @ lam
            + rho * sigma @ (x - z)
        )

    def _phi_hessian(self, x, rho, sigma) -> np.ndarray:
        return self.agent.lagrangian_hessian(x) + rho * sigma

    def kkt_residual(self, x, kappa, kappa_eq, z, lam, rho, sigma) -> float:
        """max(стационарность, допустимость, знак κ, дополняющая нежёсткость)"""
        h = self.agent.h(x)
        g = self.agent.g(x)
        stationarity = (
            self._phi_gradient(x, z, lam, rho, sigma)
            + self.agent.dh(x).T @ kappa
            + self.agent.dg(x).T @ kappa_eq
        )
        parts = [
            np.max(np.abs(stationarity), initial=0.0),
            np.max(np.maximum(h, 0.0), initial=0.0),
            np.max(np.abs(g), initial=0.0),
            np.max(np.maximum(-kappa, 0.0), initial=0.0),
            np.max(np.abs(kappa * h), initial=0.0),
        ]
        residual = float(max(parts))
        return residual if np.isfinite(residual) else float("inf")

    def _estimate_multipliers(self, x, working, z, lam, rho, sigma):
        kappa = np.zeros(self.agent.n_ineq)
        kappa_eq = np.zeros(self.agent.n_eq)
        c_w = np.vstack([self.agent.dh(x)[working], self.agent.dg(x)])
        if c_w.shape[0]:
            nu, *_ = np.linalg.lstsq(c_w.T, -self._phi_gradient(x, z, lam, rho, sigma), rcond=None)
            kappa[working] = np.maximum(nu[: len(working)], 0.0)
            kappa_eq = nu[len(working) :]
        return kappa, kappa_eq

    def _polish(self, x, z, lam, rho, sigma):
        """Ньютон для KKT системы с добавлением и удалением ограничений"""
        cfg = self.config
        n = self.agent.dim
        h = self.agent.h(x)
        working = [int(j) for j in np.flatnonzero(h > -cfg.eps_act)]
        kappa, kappa_eq = self._estimate_multipliers(x, working, z, lam, rho, sigma)
        residual = self.kkt_residual(x, kappa, kappa_eq, z, lam, rho, sigma)

        for iteration in range(cfg.local_polish_iterations):
            if residual <= cfg.tol_local:
                return x, kappa, kappa_eq, residual, iteration

            hessian = self._phi_hessian(x, rho, sigma)
            if self.agent.n_ineq and self.agent.ineq_hessian is not None:
                hessian = hessian + self.agent.ineq_hessian(x, kappa)
            if self.agent.n_eq and self.agent.eq_hessian is not None:
                hessian = hessian + self.agent.eq_hessian(x, kappa_eq)

            c_w = np.vstack([self.agent.dh(x)[working], self.agent.dg(x)])
            c_val = np.concatenate([self.agent.h(x)[working], self.agent.g(x)])
            m = c_w.shape[0]
            kkt = np.block([[hessian, c_w.T], [c_w, np.zeros((m, m))]])
            rhs = -np.concatenate([self._phi_gradient(x, z, lam, rho, sigma), c_val])
            try:
                solution = linalg.solve(kkt, rhs, assume_a="sym")
            except (linalg.LinAlgError, ValueError):
                solution, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if not np.all(np.isfinite(solution)):
                break

            step, nu = solution[:n], solution[n:]
            nu_working = nu[: len(working)]
            if len(working) and nu_working.min() < -self.config.tol_comp:
                dropped = working.pop(int(np.argmin(nu_working)))
                kappa[dropped] = 0.0
                continue

            candidate = x + step
            h_new = self.agent.h(candidate)
            inactive = [j for j in range(self.agent.n_ineq) if j not in working]
            violated = [j for j in inactive if h_new[j] > cfg.tol_feas]
            if violated:
                working.append(max(violated, key=lambda j: h_new[j]))
                working.sort()
                continue

            x = candidate
            kappa = np.zeros(self.agent.n_ineq)
            kappa[working] = np.maximum(nu_working, 0.0)
            kappa_eq = nu[len(working) :]
            residual = self.kkt_residual(x, kappa, kappa_eq, z, lam, rho, sigma)

        if residual <= cfg.tol_local:
            return x, kappa, kappa_eq, residual, cfg.local_polish_iterations
        return None, kappa, kappa_eq, residual, cfg.local_polish_iterations

    def _slsqp(self, x_start, z, lam, rho, sigma) -> np.ndarray:
        constraints = []
        if self.agent.n_ineq:
            constraints.append(
                {"type": "ineq", "fun": lambda x: -self.agent.h(x), "jac": lambda x: -self.agent.dh(x)}
            )
        if self.agent.n_eq:
            constraints.append({"type": "eq", "fun": self.agent.g, "jac": self.agent.dg})
        result = minimize(
            self._phi,
            x_start,
            args=(z, lam, rho, sigma),
            jac=self._phi_gradient,
            method="SLSQP",
            constraints=constraints,
            options={"maxiter": self.config.local_max_iterations, "ftol": 1e-14},
        )
        logger.debug(f"Agent {self.agent_index} SLSQP: status={result.status} {result.message}")
        return np.asarray(result.x, dtype=float)

    def _trust_constr(self, x_start, z, lam, rho, sigma) -> np.ndarray:
        constraints = []
        if self.agent.n_ineq:
            hess = self.agent.ineq_hessian if self.agent.ineq_hessian is not None else BFGS()
            constraints.append(
                NonlinearConstraint(self.agent.h, -np.inf, 0.0, jac=self.agent.dh, hess=hess)
            )
        if self.agent.n_eq:
            hess = self.agent.eq_hessian if self.agent.eq_hessian is not None else BFGS()
            constraints.append(NonlinearConstraint(self.agent.g, 0.0, 0.0, jac=self.agent.dg, hess=hess))
        result = minimize(
            self._phi,
            x_start,
            args=(z, lam, rho, sigma),
            jac=self._phi_gradient,
            hess=lambda x, *args: self._phi_hessian(x, rho, sigma),
            method="trust-constr",
            constraints=constraints,
            options={"maxiter": self.config.local_max_iterations, "gtol": 1e-12, "xtol": 1e-14},
        )
        logger.debug(f"Agent {self.agent_index} trust-constr: status={result.status}")
        return np.asarray(result.x, dtype=float)

    def solve_local(
        self,
        z: np.ndarray,
        lam: np.ndarray,
        rho: float,
        sigma: SigmaLike = 1.0,
    ) -> LocalStepResult:
        """Решает локальную задачу с тёплым стартом из z_i"""
        if rho <= 0:
            raise ValueError("rho must be positive")
        z = np.asarray(z, dtype=float)
        lam = np.asarray(lam, dtype=float)
        sigma = sigma_matrix(sigma, self.agent.dim)

        last_x, last_residual = z, float("inf")
        for method, runner in (("SLSQP", self._slsqp), ("trust-constr", self._trust_constr)):
            try:
                x = runner(z.copy(), z, lam, rho, sigma)
            except (ValueError, FloatingPointError, linalg.LinAlgError) as e:
                logger.debug(f"Agent {self.agent_index} {method} failed: {e}")
                continue
            if not np.all(np.isfinite(x)):
                continue
            polished, kappa, kappa_eq, residual, iterations = self._polish(x, z, lam, rho, sigma)
            last_x, last_residual = x, residual
            if polished is None:
                logger.debug(
                    f"Agent {self.agent_index} {method} polish stalled at residual {residual:.3e}"
                )
                continue

            try:
                result = LocalStepResult(
                    agent=self.agent_index,
                    x=polished,
                    kappa=kappa,
                    kappa_eq=kappa_eq,
                    objective=float(self.agent.objective(polished)),
                    kkt_residual=residual,
                    iterations=iterations,
                    method=method,
                    ineq_values=self.agent.h(polished),
                    tol_feas=self.config.tol_feas,
                    tol_comp=self.config.tol_comp,
                )
            except ValidationError as e:
                logger.debug(f"Agent {self.agent_index} {method} result rejected: {e}")
                continue
            return result.model_copy(update={"active_set": self.detect_active_set(result)})

        raise LocalSolveFailure(
            f"Local problem of agent {self.agent_index} not solved, KKT residual {last_residual:.3e}",
            agent=self.agent_index,
            last_iterate=last_x,
            residual=last_residual,
        )

    def detect_active_set(self, result: LocalStepResult, eps_act: Optional[float] = None) -> Tuple[int, ...]:
        eps = self.config.eps_act if eps_act is None else eps_act
        return detect_active_set(self.agent, result, eps)

    def build_sensitivities(self, result: LocalStepResult) -> AgentSensitivities:
        return build_sensitivities(self.agent_index, self.agent, result, self.config.reg_floor)

    def condense(self, sens: AgentSensitivities) -> CondensedContribution:
        return condense(sens, self.coupling, sens.x)

    def augment_mu(
        self, contrib: CondensedContribution, mu: float, lam: np.ndarray, assignment: AssignmentMap
    ) -> CondensedContribution:
        return augment_mu(contrib, mu, lam, assignment, self.agent_index)

    def back_substitute(self, sens: AgentSensitivities, lambda_qp: np.ndarray) -> np.ndarray:
        return back_substitute(sens, self.coupling, lambda_qp)

