"""Встроенные задачи и их эталонные решения"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from aladin.models.problems import QuarticToyParams, RandomQpParams, RobotOcpConfig
from aladin.services.assignment import build_assignment
from aladin.services.problems import (
    build_problem,
    make_quartic_toy,
    make_random_consensus_qp,
    make_robot_ocp,
    quartic_grid_minimizer,
    random_qp_solution,
    robot_feasibility,
)
from aladin.utils.exceptions import ConfigurationError, InfeasibleConfig


@pytest.mark.unit
class TestQuarticToy:
    def test_structure(self, quartic_nlp):
        assert quartic_nlp.n_agents == 2
        assert quartic_nlp.n_c == 1
        assert quartic_nlp.dims == [1, 1]
        assert_allclose(quartic_nlp.initial_guess(), [[1.0], [-1.0]])

    def test_grid_minimizer_is_stationary(self):
        params = QuarticToyParams()
        x = quartic_grid_minimizer(params, step=1e-5)
        slope = sum((x - c) ** 3 + 2.0 * a * x for c, a in zip(params.c, params.a))
        assert abs(slope) < 1e-3

    def test_invalid_lengths(self):
        with pytest.raises(ValueError):
            QuarticToyParams(c=[1.0, 2.0], a=[1.0])


@pytest.mark.unit
class TestRandomQp:
    def test_every_row_two_assigned(self):
        nlp = make_random_consensus_qp(RandomQpParams(n_agents=4, dims=[3, 4, 5, 6], n_c=9), seed=1)
        assignment = build_assignment(nlp)
        assert assignment.row_degrees == [2] * 9
        assert nlp.dims == [3, 4, 5, 6]

    def test_seed_is_reproducible(self):
        first = make_random_consensus_qp(seed=5)
        second = make_random_consensus_qp(seed=5)
        for a, b in zip(first.coupling, second.coupling):
            assert np.array_equal(a, b)

    def test_reference_solution_satisfies_kkt(self):
        nlp = make_random_consensus_qp(RandomQpParams(n_eq=1), seed=2)
        xs, lam = random_qp_solution(nlp)
        assert_allclose(nlp.consensus_residual(xs), 0.0, atol=1e-10)
        for agent, a_i, x in zip(nlp.agents, nlp.coupling, xs):
            assert_allclose(agent.g(x), 0.0, atol=1e-10)
            stationarity = agent.gradient(x) + a_i.T @ lam
            E = agent.metadata["E"]
            nu, *_ = np.linalg.lstsq(E.T, -stationarity, rcond=None)
            assert_allclose(stationarity + E.T @ nu, 0.0, atol=1e-9)

    def test_too_many_equalities(self):
        with pytest.raises(ValueError):
            RandomQpParams(dims=2, n_eq=2)


@pytest.mark.unit
class TestRobotOcp:
    def test_dimensions(self):
        nlp = make_robot_ocp()
        assert nlp.n_agents == 2
        assert nlp.dims == [140, 140]
        assert nlp.n_c == 80
        assert build_assignment(nlp).row_degrees == [2] * 80
        assert nlp.agents[0].n_eq == 62
        assert nlp.agents[0].n_ineq == 20

    def test_long_horizon_preset(self):
        nlp = build_problem("robot_ocp", {"preset": "long"})
        assert nlp.dims == [700, 700]

    def test_infeasible_start(self):
        cfg = RobotOcpConfig(starts=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(InfeasibleConfig):
            make_robot_ocp(cfg)

    def test_non_integer_grid(self):
        with pytest.raises(ValueError):
            RobotOcpConfig(horizon=1.05, step=0.1)

    def test_feasibility_report_on_straight_lines(self):
        nlp = make_robot_ocp()
        report = robot_feasibility(nlp, nlp.initial_guess())
        assert report["terminal_error"] == pytest.approx(0.0, abs=1e-12)
        assert report["min_distance"] == pytest.approx(2.0)


@pytest.mark.unit
class TestBuildProblem:
    def test_unknown_problem(self):
        with pytest.raises(ConfigurationError):
            build_problem("power_flow")

    def test_invalid_parameters(self):
        with pytest.raises(ConfigurationError):
            build_problem("random_qp", {"n_agents": 1})

    def test_seed_forwarded(self):
        first = build_problem("random_qp", seed=3)
        second = build_problem("random_qp", seed=4)
        assert not np.array_equal(first.coupling[0], second.coupling[0])
