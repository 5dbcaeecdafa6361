"""Точные решатели координационной задачи и критерий неточности"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..models.coordination import CoordinationResult, InexactnessBudget, InexactnessMode
from ..models.sensitivities import AgentSensitivities, CondensedContribution
from ..utils.exceptions import NotPositiveDefinite, SingularKkt
from .local_solver import back_substitute

logger = logging.getLogger(__name__)


def assemble_condensed(
    contribs: Sequence[CondensedContribution], augmented: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """Σ S̃_i и Σ s̃_i (или Σ S_i, Σ s_i при augmented=False)"""
    first = contribs[0]
    total_S = np.zeros_like(first.S)
    total_s = np.zeros_like(first.s)
    for contrib in contribs:
        total_S = total_S + (contrib.S_tilde if augmented else contrib.S)
        total_s = total_s + (contrib.s_tilde if augmented else contrib.s)
    return total_S, total_s


def _kkt_system(
    sens: Sequence[AgentSensitivities],
    couplings: Sequence[np.ndarray],
    xs: Sequence[np.ndarray],
    lam: np.ndarray,
    mu: float,
):
    """KKT система координационной задачи после исключения слэка

    Неизвестные: (Δx_1, κ_1, ..., Δx_N, κ_N, λ^QP).
    """
    n_c = lam.size
    blocks = []
    offset = 0
    for s in sens:
        n, m = s.x.size, s.n_act
        blocks.append((offset, n, m))
        offset += n + m
    size = offset + n_c
    kkt = np.zeros((size, size))
    rhs = np.zeros(size)
    lam_rows = slice(offset, size)

    consensus = np.zeros(n_c)
    for s, a_i, x_i, (start, n, m) in zip(sens, couplings, xs, blocks):
        x_rows = slice(start, start + n)
        k_rows = slice(start + n, start + n + m)
        kkt[x_rows, x_rows] = s.H
        kkt[x_rows, k_rows] = s.c_act.T
        kkt[k_rows, x_rows] = s.c_act
        kkt[x_rows, lam_rows] = a_i.T
        kkt[lam_rows, x_rows] = a_i
        rhs[x_rows] = -s.g
        consensus = consensus + a_i @ x_i
    kkt[lam_rows, lam_rows] = -np.eye(n_c) / mu
    # Правая часть связи b равна нулю
    rhs[lam_rows] = -consensus - lam / mu
    return kkt, rhs, blocks


def solve_full_qp(
    sens: Sequence[AgentSensitivities],
    couplings: Sequence[np.ndarray],
    xs: Sequence[np.ndarray],
    lam: np.ndarray,
    mu: float,
) -> CoordinationResult:
    """Прямое решение полной KKT системы (эталон для всех сравнений)"""
    lam = np.asarray(lam, dtype=float)
    kkt, rhs, blocks = _kkt_system(sens, couplings, xs, lam, mu)
    try:
        solution = linalg.solve(kkt, rhs, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularKkt(f"Coordination KKT system is singular: {e}")
    if not np.all(np.isfinite(solution)):
        raise SingularKkt("Coordination KKT solve produced non-finite values")

    delta_x = [solution[start : start + n] for start, n, _ in blocks]
    lambda_qp = solution[-lam.size :]
    slack = sum(a_i @ (x_i + dx) for a_i, x_i, dx in zip(couplings, xs, delta_x))
    residual = float(np.linalg.norm(kkt @ solution - rhs))
    return CoordinationResult(
        lambda_qp=lambda_qp,
        delta_x=delta_x,
        slack=np.asarray(slack),
        residual_norm=residual,
        exact=True,
    )


def solve_condensed_exact(
    contribs: Sequence[CondensedContribution],
    lam: np.ndarray,
    mu: float,
    sens: Optional[Sequence[AgentSensitivities]] = None,
    couplings: Optional[Sequence[np.ndarray]] = None,
) -> CoordinationResult:
    """(μ⁻¹I + Σ S_i) λ^QP = μ⁻¹λ + Σ s_i, затем обратная подстановка"""
    lam = np.asarray(lam, dtype=float)
    total_S, total_s = assemble_condensed(contribs, augmented=False)
    matrix = total_S + np.eye(lam.size) / mu
    rhs = lam / mu + total_s
    try:
        factor = linalg.cho_factor(matrix)
    except linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Condensed coordination matrix is not positive definite: {e}")
    lambda_qp = linalg.cho_solve(factor, rhs)

    delta_x: List[np.ndarray] = []
    slack = None
    if sens is not None and couplings is not None:
        delta_x = [back_substitute(s, a_i, lambda_qp) for s, a_i in zip(sens, couplings)]
        slack = sum(a_i @ (s.x + dx) for s, a_i, dx in zip(sens, couplings, delta_x))
    return CoordinationResult(
        lambda_qp=lambda_qp,
        delta_x=delta_x,
        slack=slack,
        residual_norm=lambda_residual(contribs, lambda_qp, lam, mu),
        exact=True,
    )


def lambda_residual(
    contribs: Sequence[CondensedContribution],
    lambda_candidate: np.ndarray,
    lam: np.ndarray,
    mu: float,
) -> float:
    """‖(μ⁻¹I + Σ S_i) λ_cand - μ⁻¹λ - Σ s_i‖₂"""
    total_S, total_s = assemble_condensed(contribs, augmented=False)
    residual = total_S @ lambda_candidate + (lambda_candidate - lam) / mu - total_s
    return float(np.linalg.norm(residual))


def full_residual(
    sens: Sequence[AgentSensitivities],
    couplings: Sequence[np.ndarray],
    xs: Sequence[np.ndarray],
    lambda_candidate: np.ndarray,
    lam: np.ndarray,
    mu: float,
) -> float:
    """Невязка полной KKT системы в точке, восстановленной из λ_cand

    Δx_i берутся обратной подстановкой, κ_i из C_actᵀκ = -(HΔx + Aᵀλ + g).
    """
    lam = np.asarray(lam, dtype=float)
    kkt, rhs, blocks = _kkt_system(sens, couplings, xs, lam, mu)
    point = np.zeros(rhs.size)
    for s, a_i, (start, n, m) in zip(sens, couplings, blocks):
        dx = back_substitute(s, a_i, lambda_candidate)
        point[start : start + n] = dx
        if m:
            target = -(s.H @ dx + a_i.T @ lambda_candidate + s.g)
            kappa, *_ = np.linalg.lstsq(s.c_act.T, target, rcond=None)
            point[start + n : start + n + m] = kappa
    point[-lam.size :] = lambda_candidate
    return float(np.linalg.norm(kkt @ point - rhs))


def m_norm(
    sens: Sequence[AgentSensitivities],
    couplings: Sequence[np.ndarray],
    xs: Sequence[np.ndarray],
    lam: np.ndarray,
) -> float:
    """‖m(p)‖ для m = (-g - C_actᵀκ - Aᵀλ, -Σ A_i x_i, 0)"""
    parts = []
    consensus = np.zeros(lam.size)
    for s, a_i, x_i in zip(sens, couplings, xs):
        parts.append(-s.g - s.c_act.T @ s.multipliers - a_i.T @ lam)
        consensus = consensus + a_i @ x_i
    parts.append(-consensus)
    return float(np.linalg.norm(np.concatenate(parts)))


def accept_inexact(
    budget: InexactnessBudget,
    residual: float,
    next_m_norm: Optional[float] = None,
) -> Tuple[bool, InexactnessBudget]:
    """Проверка ‖r_λ‖ <= η ‖m(p)‖; в режиме фиксированных итераций всегда True"""
    if residual < 0:
        raise ValueError("residual must be non-negative")
    if budget.mode == InexactnessMode.RESIDUAL:
        accepted = residual <= budget.target
    else:
        accepted = True
    if not accepted:
        logger.warning(
            f"Inexact coordination rejected: residual {residual:.3e} > target {budget.target:.3e}"
        )
    if next_m_norm is not None:
        budget = budget.refresh(next_m_norm)
    return accepted, budget
