"""Децентрализованный CG против централизованного и учёт сообщений"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from aladin.models.coordination import InexactnessMode
from aladin.models.nlp import AssignmentMap
from aladin.models.sensitivities import CondensedContribution
from aladin.services.coordination import assemble_condensed
from aladin.services.dcg import centralized_cg, cg_iterate, cg_prepare
from aladin.services.netsim import NetworkSimulator, expected_counts
from aladin.utils.exceptions import IndefiniteDetected, NotTwoAssigned

from conftest import random_two_assigned_system


def _run(contribs, assignment, lam0, **kwargs):
    network = NetworkSimulator(assignment.n_agents)
    states = cg_prepare(contribs, assignment, network)
    result = cg_iterate(states, assignment, network, lam0, **kwargs)
    return result, network


@pytest.mark.unit
class TestDecentralizedCg:
    @pytest.mark.parametrize("n_c", [8, 16, 32, 40])
    def test_matches_centralized_iterates(self, n_c):
        rng = np.random.default_rng(n_c)
        contribs, assignment = random_two_assigned_system(rng, n_agents=4, n_c=n_c, single_rows=2)
        matrix, rhs = assemble_condensed(contribs)
        lam0 = rng.normal(size=n_c)
        steps = min(n_c // 2, 8)

        result, _ = _run(contribs, assignment, lam0, n_iterations=steps, record_history=True)
        _, reference = centralized_cg(matrix, rhs, lam0, steps)

        assert result.inner_iterations == steps
        for mine, theirs in zip(result.history, reference):
            assert_allclose(mine["alpha"], theirs["alpha"], rtol=1e-8)
            assert_allclose(mine["beta"], theirs["beta"], rtol=1e-8)
            assert_allclose(mine["lambda"], theirs["lambda"], rtol=1e-10, atol=1e-11)

    @pytest.mark.parametrize("n_c", [8, 16, 32, 40])
    def test_finite_termination(self, n_c):
        rng = np.random.default_rng(100 + n_c)
        contribs, assignment = random_two_assigned_system(rng, n_agents=5, n_c=n_c)
        matrix, rhs = assemble_condensed(contribs)

        result, _ = _run(
            contribs,
            assignment,
            np.zeros(n_c),
            mode=InexactnessMode.RESIDUAL,
            target=1e-10,
            max_iterations=n_c + 5,
        )
        assert result.inner_iterations <= n_c + 5
        assert result.residual_norm <= 1e-9
        assert np.linalg.norm(matrix @ result.lambda_qp - rhs) <= 1e-8

    def test_warm_start_at_solution_stops(self):
        rng = np.random.default_rng(3)
        contribs, assignment = random_two_assigned_system(rng, n_agents=3, n_c=6)
        matrix, rhs = assemble_condensed(contribs)
        solution = np.linalg.solve(matrix, rhs)

        result, _ = _run(
            contribs, assignment, solution, mode=InexactnessMode.RESIDUAL, target=1e-8
        )
        assert result.inner_iterations == 0
        assert_allclose(result.lambda_qp, solution)

    def test_ledger_matches_closed_form(self):
        rng = np.random.default_rng(11)
        contribs, assignment = random_two_assigned_system(rng, n_agents=4, n_c=12, single_rows=3)
        result, network = _run(contribs, assignment, np.zeros(12), n_iterations=5)

        expected = expected_counts(
            "bilevel-cg", n_c=12, n_agents=4, n_cg=5, row_degrees=assignment.row_degrees
        )
        assert result.inner_iterations == 5
        assert network.ledger == expected

    def test_three_assigned_rejected(self):
        assignment = AssignmentMap(r_assigned=[(0, 1, 2)], c_assigned=[(0,), (0,), (0,)])
        contribs = [
            CondensedContribution(agent=i, S=np.eye(1), s=np.ones(1), S_tilde=np.eye(1), s_tilde=np.ones(1))
            for i in range(3)
        ]
        with pytest.raises(NotTwoAssigned):
            cg_prepare(contribs, assignment, NetworkSimulator(3))

    def test_indefinite_detected(self):
        assignment = AssignmentMap(r_assigned=[(0, 1), (0, 1)], c_assigned=[(0, 1), (0, 1)])
        S = -np.eye(2)
        contribs = [
            CondensedContribution(
                agent=i, S=S, s=np.ones(2), S_tilde=S, s_tilde=np.ones(2), assigned_rows=(0, 1)
            )
            for i in range(2)
        ]
        with pytest.raises(IndefiniteDetected):
            _run(contribs, assignment, np.zeros(2), n_iterations=3)
