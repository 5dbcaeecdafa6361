"""Внешний цикл ALADIN: стандартный, сконденсированный и двухуровневые варианты"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from ..config import Settings, settings as default_settings
from ..models.coordination import CoordinationResult, InexactnessBudget, InexactnessMode
from ..models.network import COORDINATOR, Message, MessageTag
from ..models.nlp import PartitionedNlp
from ..models.run import IterationRecord, OuterState, RunConfig
from ..models.sensitivities import AgentSensitivities, CondensedContribution, LocalStepResult
from ..utils.exceptions import ConfigurationError, NotPositiveDefinite, NotTwoAssigned
from .assignment import build_assignment
from .coordination import (
    accept_inexact,
    assemble_condensed,
    lambda_residual,
    m_norm,
    solve_condensed_exact,
    solve_full_qp,
)
from .dadmm import admm_iterate, admm_prepare
from .dcg import cg_iterate, cg_prepare
from .local_solver import LocalSolver
from .netsim import NetworkSimulator

logger = logging.getLogger(__name__)


class BilevelAladin:
    """Сервис внешнего цикла

    На каждой итерации: параллельные локальные шаги, проверка сходимости,
    чувствительности и конденсация, координация выбранным методом,
    обновление z = x + Δx и λ = λ^QP.
    """

    def __init__(
        self,
        nlp: PartitionedNlp,
        config: RunConfig,
        settings: Optional[Settings] = None,
        network: Optional[NetworkSimulator] = None,
    ):
        self.nlp = nlp
        self.config = config
        self.settings = settings or default_settings
        self.assignment = build_assignment(nlp)
        if config.is_bilevel and self.assignment.assignment_degree > 2:
            raise NotTwoAssigned(self.assignment.assignment_degree)
        self.network = network or NetworkSimulator(nlp.n_agents, record_trace=config.output.write_trace)
        self.solvers = [
            LocalSolver(i, agent, a_i, self.settings)
            for i, (agent, a_i) in enumerate(zip(nlp.agents, nlp.coupling))
        ]
        if isinstance(config.outer.sigma, list) and len(config.outer.sigma) != nlp.n_agents:
            raise ConfigurationError(
                f"outer.sigma has {len(config.outer.sigma)} entries for {nlp.n_agents} agents"
            )
        self.sigmas = [config.outer.sigma_for(i) for i in range(nlp.n_agents)]
        self.budget = InexactnessBudget(
            eta=config.inner.eta,
            mode=config.inner.mode,
            schedule=config.inner.eta_schedule,
            eta_max=config.inner.eta_max,
        )
        self.records: List[IterationRecord] = []
        self.state: Optional[OuterState] = None

    def initial_state(self) -> OuterState:
        return OuterState(
            z=self.nlp.initial_guess(),
            lam=np.zeros(self.nlp.n_c),
            mu=self.config.outer.mu,
        )

    # Шаг 1: локальные задачи

    def local_step(self, state: OuterState) -> List[LocalStepResult]:
        rho = self.config.outer.rho
        jobs = list(zip(self.solvers, state.z, self.sigmas))
        workers = min(self.settings.max_workers, len(jobs))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(s.solve_local, z_i, state.lam, rho, sig) for s, z_i, sig in jobs]
                return [f.result() for f in futures]
        return [s.solve_local(z_i, state.lam, rho, sig) for s, z_i, sig in jobs]

    def _residuals(self, state: OuterState, results: List[LocalStepResult]) -> Tuple[float, float]:
        xs = [r.x for r in results]
        consensus = float(np.max(np.abs(self.nlp.consensus_residual(xs)), initial=0.0))
        gap = max(float(np.max(np.abs(x - z), initial=0.0)) for x, z in zip(xs, state.z))
        return consensus, gap

    def _check_condensed(self, contribs: List[CondensedContribution]) -> None:
        """S_i симметричны и PSD, Σ S̃_i положительно определена"""
        for contrib in contribs:
            scale = 1.0 + float(np.max(np.abs(contrib.S), initial=0.0))
            min_eig = float(np.linalg.eigvalsh(contrib.S).min()) if contrib.S.size else 0.0
            if min_eig < -1e-10 * scale:
                raise NotPositiveDefinite(f"S_{contrib.agent} has negative eigenvalue {min_eig:.3e}")
        if contribs and contribs[0].is_augmented:
            total, _ = assemble_condensed(contribs)
            min_eig = float(np.linalg.eigvalsh(total).min())
            if min_eig <= 0.0:
                raise NotPositiveDefinite(f"Assembled condensed matrix has eigenvalue {min_eig:.3e}")

    # Шаг 2: координация

    def _upload_condensed(self, contribs: List[CondensedContribution]) -> None:
        """Агенты отправляют строки S_i[j, j:] и s_i[j] координатору"""
        outbox = []
        for contrib in contribs:
            for j in contrib.assigned_rows:
                outbox.append(
                    Message(sender=contrib.agent, receiver=COORDINATOR, payload=contrib.S[j, j:],
                            tag=MessageTag.FORWARD, rows=(j,))
                )
            if contrib.assigned_rows:
                rows = list(contrib.assigned_rows)
                outbox.append(
                    Message(sender=contrib.agent, receiver=COORDINATOR, payload=contrib.s[rows],
                            tag=MessageTag.FORWARD_RHS, rows=tuple(rows))
                )
        self.network.round_exchange(outbox)

    def _upload_standard(self, sens: List[AgentSensitivities]) -> None:
        """Верхний треугольник локального блока [[H, C_actᵀ], [C_act, 0]] и g_i"""
        outbox = []
        for s in sens:
            n, m = s.x.size, s.n_act
            block = np.block([[s.H, s.c_act.T], [s.c_act, np.zeros((m, m))]])
            upper = block[np.triu_indices(n + m)]
            outbox.append(Message(sender=s.agent, receiver=COORDINATOR, payload=upper, tag=MessageTag.FORWARD))
            outbox.append(Message(sender=s.agent, receiver=COORDINATOR, payload=s.g, tag=MessageTag.FORWARD_RHS))
        self.network.round_exchange(outbox)

    def _broadcast(self, lambda_qp: np.ndarray, delta_x: Optional[List[np.ndarray]] = None) -> None:
        outbox = []
        for i in range(self.nlp.n_agents):
            rows = list(self.assignment.c_assigned[i])
            if delta_x is not None:
                outbox.append(Message(sender=COORDINATOR, receiver=i, payload=delta_x[i], tag=MessageTag.BACKWARD))
            if rows:
                outbox.append(
                    Message(sender=COORDINATOR, receiver=i, payload=lambda_qp[rows],
                            tag=MessageTag.BACKWARD, rows=tuple(rows))
                )
        self.network.round_exchange(outbox)

    def coordinate(
        self,
        state: OuterState,
        sens: List[AgentSensitivities],
        contribs: List[CondensedContribution],
        target: float,
    ) -> CoordinationResult:
        variant = self.config.variant
        inner = self.config.inner
        xs = [s.x for s in sens]

        if variant == "standard":
            self._upload_standard(sens)
            result = solve_full_qp(sens, self.nlp.coupling, xs, state.lam, state.mu)
            self._broadcast(result.lambda_qp, result.delta_x)
            return result

        if variant == "condensed-exact":
            self._upload_condensed(contribs)
            result = solve_condensed_exact(contribs, state.lam, state.mu)
            self._broadcast(result.lambda_qp)
        elif variant == "bilevel-cg":
            states = cg_prepare(contribs, self.assignment, self.network)
            result = cg_iterate(
                states,
                self.assignment,
                self.network,
                lam0=state.lam,
                n_iterations=inner.n_cg,
                mode=inner.mode,
                target=target,
                max_iterations=inner.max_iterations,
            )
        else:
            states = admm_prepare(contribs, self.assignment, inner.rho_admm, state.lam)
            result = admm_iterate(
                states,
                self.assignment,
                self.network,
                inner.rho_admm,
                n_iterations=inner.n_ad,
                mode=inner.mode,
                target=target,
                max_iterations=inner.max_iterations,
                config=self.settings,
            )

        # Обратная подстановка выполняется каждым агентом локально
        result.delta_x = [
            solver.back_substitute(s, result.lambda_qp) for solver, s in zip(self.solvers, sens)
        ]
        result.slack = sum(a_i @ (s.x + dx) for a_i, s, dx in zip(self.nlp.coupling, sens, result.delta_x))
        return result

    # Итерация целиком

    def step(self, state: OuterState) -> Tuple[OuterState, IterationRecord]:
        self.network.start_iteration()
        results = self.local_step(state)
        xs = [r.x for r in results]
        consensus, gap = self._residuals(state, results)
        objective = self.nlp.objective(xs)
        tol = self.config.outer.tol

        if max(consensus, gap) <= tol:
            state = state.model_copy(
                update={"x": xs, "kappa": [r.kappa for r in results], "converged": True}
            )
            record = IterationRecord(
                iteration=state.iteration,
                consensus_residual=consensus,
                primal_gap=gap,
                mu=state.mu,
                objective=objective,
                ledger=self.network.iteration_delta(),
            )
            return state, record

        sens = [solver.build_sensitivities(r) for solver, r in zip(self.solvers, results)]
        contribs = [solver.condense(s) for solver, s in zip(self.solvers, sens)]
        contribs = [
            solver.augment_mu(c, state.mu, state.lam, self.assignment)
            for solver, c in zip(self.solvers, contribs)
        ]
        if self.settings.check_condensed:
            self._check_condensed(contribs)

        current_m = m_norm(sens, self.nlp.coupling, xs, state.lam)
        self.budget = self.budget.refresh(current_m)
        target = max(
            self.budget.target,
            self.settings.inner_residual_floor * float(np.linalg.norm(assemble_condensed(contribs)[1])),
        )

        result = self.coordinate(state, sens, contribs, target)
        residual = lambda_residual(contribs, result.lambda_qp, state.lam, state.mu)
        accepted, self.budget = accept_inexact(self.budget, residual)
        if self.config.inner.mode == InexactnessMode.RESIDUAL and not accepted:
            logger.warning(f"Iteration {state.iteration}: continuing with rejected inexact step")

        record = IterationRecord(
            iteration=state.iteration,
            consensus_residual=consensus,
            primal_gap=gap,
            lambda_residual=residual,
            m_norm=current_m,
            eta=self.budget.eta,
            accepted=accepted,
            inner_iterations=result.inner_iterations,
            mu=state.mu,
            objective=objective,
            ledger=self.network.iteration_delta(),
        )
        logger.info(
            f"Iteration {state.iteration}: consensus={consensus:.3e} gap={gap:.3e} "
            f"r_lambda={residual:.3e} inner={result.inner_iterations} "
            f"floats={record.ledger.local_total + record.ledger.global_total}"
        )

        outer = self.config.outer
        new_state = OuterState(
            z=[x + dx for x, dx in zip(xs, result.delta_x)],
            lam=np.asarray(result.lambda_qp, dtype=float),
            x=xs,
            kappa=[r.kappa for r in results],
            mu=min(outer.mu_max, outer.mu_growth * state.mu),
            iteration=state.iteration + 1,
        )
        return new_state, record

    def solve(self, state: Optional[OuterState] = None) -> OuterState:
        """Повторяет итерации до сходимости или исчерпания лимита"""
        state = state or self.initial_state()
        self.state = state
        for _ in range(self.config.outer.max_iterations + 1):
            state, record = self.step(state)
            self.records.append(record)
            self.state = state
            if state.converged:
                logger.info(f"Converged after {record.iteration} iterations")
                return state
            if state.iteration >= self.config.outer.max_iterations:
                break
        logger.warning(f"Outer iteration limit {self.config.outer.max_iterations} reached")
        return state
