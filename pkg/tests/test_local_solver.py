"""Локальный шаг: решение NLP агента, активное множество, чувствительности, конденсация"""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError
from scipy.optimize import minimize_scalar

from aladin.models.nlp import AgentProblem, AssignmentMap
from aladin.models.sensitivities import CondensedContribution, LocalStepResult
from aladin.services.assignment import build_assignment
from aladin.services.local_solver import (
    LocalSolver,
    augment_mu,
    back_substitute,
    make_sensitivities,
    nullspace_basis,
)
from aladin.services.problems import make_robot_ocp
from aladin.utils.exceptions import LocalSolveFailure, RankDeficientActiveJacobian

from conftest import qp_contributions, qp_point, random_qp


def _quartic_reference(agent, coupling, z, lam, rho, lower=-3.0, upper=3.0):
    def phi(x):
        return agent.objective(np.array([x])) + lam @ coupling[:, 0] * x + 0.5 * rho * (x - z) ** 2

    return minimize_scalar(phi, bounds=(lower, upper), method="bounded", options={"xatol": 1e-12}).x


@pytest.mark.unit
class TestSolveLocal:
    @pytest.mark.parametrize("z,lam", [(0.3, 0.0), (-1.2, 0.5), (2.0, -1.0)])
    def test_quartic_interior(self, quartic_nlp, settings, z, lam):
        agent, coupling = quartic_nlp.agents[0], quartic_nlp.coupling[0]
        solver = LocalSolver(0, agent, coupling, settings)
        result = solver.solve_local(np.array([z]), np.array([lam]), rho=10.0)

        expected = _quartic_reference(agent, coupling, z, np.array([lam]), 10.0)
        assert result.x[0] == pytest.approx(expected, abs=1e-6)
        assert result.kkt_residual <= settings.tol_local
        assert result.active_set == ()
        assert np.all(result.kappa >= 0.0)

    def test_bound_becomes_active(self, quartic_nlp, settings):
        agent, coupling = quartic_nlp.agents[0], quartic_nlp.coupling[0]
        solver = LocalSolver(0, agent, coupling, settings)
        # большой λ тянет x к нижней границе -3
        result = solver.solve_local(np.array([0.0]), np.array([500.0]), rho=1.0)

        assert result.x[0] == pytest.approx(-3.0, abs=1e-8)
        assert result.active_set == (1,)
        assert result.kappa[1] > 0.0
        assert result.kappa[0] == 0.0

    def test_sigma_scaling(self, quartic_nlp, settings):
        agent, coupling = quartic_nlp.agents[1], quartic_nlp.coupling[1]
        solver = LocalSolver(1, agent, coupling, settings)
        z, lam = np.array([0.5]), np.array([0.2])
        scaled = solver.solve_local(z, lam, rho=2.0, sigma=5.0)
        plain = solver.solve_local(z, lam, rho=10.0)
        assert_allclose(scaled.x, plain.x, atol=1e-8)

    def test_infeasible_problem_fails(self, settings):
        agent = AgentProblem(
            name="infeasible",
            dim=1,
            objective=lambda x: float(x[0] ** 2),
            gradient=lambda x: 2.0 * x,
            hessian=lambda x: np.array([[2.0]]),
            n_ineq=2,
            ineq=lambda x: np.array([x[0] + 1.0, 1.0 - x[0]]),
            ineq_jacobian=lambda x: np.array([[1.0], [-1.0]]),
            x0=[0.0],
        )
        solver = LocalSolver(0, agent, np.ones((1, 1)), settings)
        with pytest.raises(LocalSolveFailure) as error:
            solver.solve_local(np.zeros(1), np.zeros(1), rho=1.0)
        assert error.value.agent == 0
        assert error.value.last_iterate is not None

    def test_rho_must_be_positive(self, quartic_nlp, settings):
        solver = LocalSolver(0, quartic_nlp.agents[0], quartic_nlp.coupling[0], settings)
        with pytest.raises(ValueError):
            solver.solve_local(np.zeros(1), np.zeros(1), rho=0.0)

    @pytest.mark.integration
    def test_robot_knot_step_stays_in_nullspace(self, settings):
        nlp = make_robot_ocp()
        agent, coupling = nlp.agents[0], nlp.coupling[0]
        solver = LocalSolver(0, agent, coupling, settings)
        result = solver.solve_local(agent.x0, np.zeros(nlp.n_c), rho=1e2)
        assert result.kkt_residual <= settings.tol_local

        sens = solver.build_sensitivities(result)
        step = solver.back_substitute(sens, np.ones(nlp.n_c))
        assert np.max(np.abs(sens.c_act @ step)) <= 1e-10


@pytest.mark.unit
class TestSensitivities:
    def test_nullspace_is_orthonormal(self):
        rng = np.random.default_rng(0)
        c_act = rng.normal(size=(3, 7))
        Z = nullspace_basis(c_act, 7)
        assert Z.shape == (7, 4)
        assert_allclose(c_act @ Z, 0.0, atol=1e-12)
        assert_allclose(Z.T @ Z, np.eye(4), atol=1e-12)

    def test_rank_deficient_active_jacobian(self):
        c_act = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
        with pytest.raises(RankDeficientActiveJacobian):
            nullspace_basis(c_act, 3)

    def test_negative_curvature_is_flipped(self):
        sens = make_sensitivities(0, np.zeros(2), np.diag([-1.0, 4.0]), np.zeros(2), reg_floor=1e-3)
        assert_allclose(np.linalg.eigvalsh(sens.h_bar), [1.0, 4.0])
        assert_allclose(sens.Z.T @ sens.H @ sens.Z, sens.h_bar, atol=1e-12)

    def test_small_curvature_is_floored(self):
        hessian = np.diag([-1e-5, 0.0, 2.0])
        sens = make_sensitivities(0, np.zeros(3), hessian, np.zeros(3), reg_floor=1e-3)
        assert_allclose(np.linalg.eigvalsh(sens.h_bar), [1e-3, 1e-3, 2.0])

    def test_convex_directions_untouched(self):
        sens = make_sensitivities(0, np.zeros(2), np.diag([1.0, -1.0]), np.zeros(2), reg_floor=1e-6)
        assert_allclose(sens.H, np.eye(2), atol=1e-12)

    def test_fully_constrained_agent(self):
        sens = make_sensitivities(0, np.zeros(1), np.eye(1), np.ones(1), c_act=np.ones((1, 1)))
        assert sens.nullspace_dim == 0
        assert_allclose(back_substitute(sens, np.ones((1, 1)), np.ones(1)), [0.0])


@pytest.mark.unit
class TestCondense:
    @pytest.mark.parametrize("seed", range(100))
    def test_sparsity_outside_assigned_rows(self, seed):
        rng = np.random.default_rng(seed)
        nlp = random_qp(seed, n_agents=int(rng.integers(2, 5)), n_c=int(rng.integers(2, 12)))
        sens, _ = qp_point(nlp, rng)
        contribs, assignment = qp_contributions(nlp, sens, 1e6, rng.normal(size=nlp.n_c))

        for i, contrib in enumerate(contribs):
            outside = [j for j in range(nlp.n_c) if j not in assignment.c_assigned[i]]
            assert np.all(contrib.S[outside, :] == 0.0)
            assert np.all(contrib.S[:, outside] == 0.0)
            assert np.all(contrib.s[outside] == 0.0)

    @pytest.mark.parametrize("seed", range(100))
    def test_symmetric_psd_and_augmented_pd(self, seed):
        rng = np.random.default_rng(500 + seed)
        nlp = random_qp(seed, n_agents=3, dims=int(rng.integers(2, 8)), n_c=int(rng.integers(2, 10)), n_eq=1)
        sens, _ = qp_point(nlp, rng)
        contribs, _ = qp_contributions(nlp, sens, 1e6, np.zeros(nlp.n_c))

        total = np.zeros((nlp.n_c, nlp.n_c))
        for contrib in contribs:
            assert_allclose(contrib.S, contrib.S.T, atol=0.0)
            assert np.linalg.eigvalsh(contrib.S).min() >= -1e-10 * max(1.0, np.abs(contrib.S).max())
            total += contrib.S_tilde
        assert np.linalg.eigvalsh(total).min() > 0.0

    def test_single_agent_augmentation(self):
        """n_c = 1, одно назначение, μ = 10: S̃ = S + 0.1, s̃ = s + 0.1λ"""
        assignment = AssignmentMap(r_assigned=[(0,)], c_assigned=[(0,)])
        contrib = CondensedContribution(agent=0, S=np.array([[2.0]]), s=np.array([1.0]), assigned_rows=(0,))
        augmented = augment_mu(contrib, 10.0, np.array([3.0]), assignment, 0)
        assert augmented.S_tilde[0, 0] == pytest.approx(2.1)
        assert augmented.s_tilde[0] == pytest.approx(1.3)

    def test_back_substitution_in_nullspace(self):
        rng = np.random.default_rng(6)
        nlp = random_qp(6, n_eq=2)
        sens, _ = qp_point(nlp, rng)
        for s, a_i in zip(sens, nlp.coupling):
            step = back_substitute(s, a_i, rng.normal(size=nlp.n_c))
            assert_allclose(s.c_act @ step, 0.0, atol=1e-10)

    def test_quartic_assignment(self, quartic_nlp):
        assignment = build_assignment(quartic_nlp)
        assert assignment.r_assigned == [(0, 1)]
        assert assignment.assignment_degree == 2


def _box_qp_agent(Q, q, lower, upper):
    n = q.size
    return AgentProblem(
        name="box-qp",
        dim=n,
        objective=lambda x: float(0.5 * x @ Q @ x + q @ x),
        gradient=lambda x: Q @ x + q,
        hessian=lambda x: Q,
        n_ineq=2 * n,
        ineq=lambda x: np.concatenate([x - upper, lower - x]),
        ineq_jacobian=lambda x: np.vstack([np.eye(n), -np.eye(n)]),
        ineq_hessian=lambda x, kappa: np.zeros((n, n)),
        x0=np.zeros(n),
    )


def _box_qp_oracle(P, c, lower, upper):
    """Перебор состояний (свободна, на нижней, на верхней) для min ½xᵀPx + cᵀx на box"""
    n = c.size
    for states in itertools.product((0, -1, 1), repeat=n):
        x = np.where(np.array(states) == 1, upper, lower).astype(float)
        free = [j for j in range(n) if states[j] == 0]
        fixed = [j for j in range(n) if states[j] != 0]
        if free:
            x[free] = np.linalg.solve(P[np.ix_(free, free)], -(c[free] + P[np.ix_(free, fixed)] @ x[fixed]))
        if np.any(x < lower - 1e-12) or np.any(x > upper + 1e-12):
            continue
        grad = P @ x + c
        kappa = np.zeros(2 * n)
        for j in fixed:
            if states[j] == 1:
                kappa[j] = -grad[j]
            else:
                kappa[n + j] = grad[j]
        if np.all(kappa >= -1e-12):
            return x, kappa, states
    raise AssertionError("strictly convex box QP has a KKT point")


@pytest.mark.unit
class TestActiveSetOracle:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_box_qp_active_set(self, settings, seed):
        rng = np.random.default_rng(900 + seed)
        n, rho = 4, 1.0
        B = rng.normal(size=(n, n))
        Q = B @ B.T + np.eye(n)
        q = 3.0 * rng.normal(size=n)
        lower, upper = -np.ones(n), np.ones(n)
        z = np.zeros(n)

        x_ref, kappa_ref, states = _box_qp_oracle(Q + rho * np.eye(n), q - rho * z, lower, upper)
        expected = tuple(j for j in range(n) if states[j] == 1) + tuple(n + j for j in range(n) if states[j] == -1)
        slack = np.minimum(upper - x_ref, x_ref - lower)
        free = np.array(states) == 0
        if np.any(kappa_ref[list(expected)] <= 1e-4) or np.any(slack[free] <= 1e-4):
            pytest.skip("strict complementarity does not hold for this draw")

        solver = LocalSolver(0, _box_qp_agent(Q, q, lower, upper), np.zeros((1, n)), settings)
        result = solver.solve_local(z, np.zeros(1), rho=rho)

        assert result.active_set == tuple(sorted(expected))
        assert_allclose(result.x, x_ref, atol=1e-8)
        assert_allclose(result.kappa, kappa_ref, atol=1e-6)
        assert np.all(result.kappa[list(result.active_set)] > 0.0)


@pytest.mark.unit
class TestMultiplierShift:
    @pytest.mark.parametrize("delta", [1e-3, -1e-3])
    def test_shift_against_first_order_prediction(self, quartic_nlp, settings, delta):
        agent, coupling = quartic_nlp.agents[0], quartic_nlp.coupling[0]
        solver = LocalSolver(0, agent, coupling, settings)
        z, rho = np.array([0.3]), 10.0

        base = solver.solve_local(z, np.zeros(1), rho=rho)
        shifted = solver.solve_local(z, np.array([delta]), rho=rho)

        a_i = coupling[0, 0]
        curvature = np.atleast_2d(agent.hessian(base.x))[0, 0]
        predicted = -delta * a_i / (rho + curvature)
        shift = shifted.x[0] - base.x[0]
        assert np.sign(shift) == np.sign(predicted)
        assert shift == pytest.approx(predicted, rel=1e-2)


@pytest.mark.unit
class TestLocalStepInvariants:
    def _result(self, **update):
        fields = dict(
            agent=0,
            x=np.zeros(1),
            kappa=np.array([0.0, 2.0]),
            kappa_eq=np.zeros(0),
            objective=0.0,
            ineq_values=np.array([-1.0, 0.0]),
        )
        fields.update(update)
        return LocalStepResult(**fields)

    def test_valid_result(self):
        assert self._result().kappa[1] == 2.0

    def test_infeasible_point_rejected(self):
        with pytest.raises(ValidationError):
            self._result(ineq_values=np.array([1e-3, 0.0]))

    def test_negative_multiplier_rejected(self):
        with pytest.raises(ValidationError):
            self._result(kappa=np.array([-1e-3, 2.0]))

    def test_complementarity_rejected(self):
        with pytest.raises(ValidationError):
            self._result(kappa=np.array([1.0, 2.0]))

    def test_solver_result_carries_constraint_values(self, quartic_nlp, settings):
        agent = quartic_nlp.agents[0]
        result = LocalSolver(0, agent, quartic_nlp.coupling[0], settings).solve_local(
            np.array([0.5]), np.zeros(1), rho=1.0
        )
        assert_allclose(result.ineq_values, agent.h(result.x))
