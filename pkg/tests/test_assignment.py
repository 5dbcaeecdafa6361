"""Назначение строк консенсуса и переформулировка в 2-назначенную форму"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from aladin.models.nlp import PartitionedNlp
from aladin.models.run import OuterParams, RunConfig
from aladin.services.aladin import BilevelAladin
from aladin.services.assignment import build_assignment, reformulate_two_assigned
from aladin.services.problems import make_quartic_toy
from aladin.utils.exceptions import NotTwoAssigned, OrphanConsensusRowError


@pytest.mark.unit
class TestBuildAssignment:
    def test_rows_and_columns_are_transposes(self, three_assigned_quartic_params):
        assignment = build_assignment(make_quartic_toy(three_assigned_quartic_params))
        assert assignment.r_assigned == [(0, 1), (0, 1, 2)]
        assert assignment.c_assigned == [(0, 1), (0, 1), (1,)]
        assert assignment.assignment_degree == 3
        assert assignment.owner(1) == 0
        assert assignment.mirrors(1) == (1, 2)
        assert assignment.neighbors(2) == (0, 1)

    def test_orphan_row(self, quartic_nlp):
        coupling = [np.vstack([a_i, np.zeros((1, 1))]) for a_i in quartic_nlp.coupling]
        nlp = PartitionedNlp(agents=quartic_nlp.agents, coupling=coupling, n_c=2)
        with pytest.raises(OrphanConsensusRowError) as error:
            build_assignment(nlp)
        assert error.value.row == 1

    def test_two_assigned_unchanged(self, quartic_nlp):
        assert reformulate_two_assigned(quartic_nlp) is quartic_nlp


@pytest.mark.unit
class TestReformulation:
    def test_structure(self, three_assigned_quartic_params):
        nlp = make_quartic_toy(three_assigned_quartic_params)
        reformulated = reformulate_two_assigned(nlp)
        assignment = build_assignment(reformulated)

        assert assignment.assignment_degree <= 2
        assert reformulated.dims == [2, 1, 1]
        assert reformulated.original_dims == [1, 1, 1]
        assert reformulated.n_c == 3

    def test_feasible_points_correspond(self, three_assigned_quartic_params):
        """x и его копия дают тот же остаток связи, что и исходная задача"""
        nlp = make_quartic_toy(three_assigned_quartic_params)
        reformulated = reformulate_two_assigned(nlp)
        xs = [np.array([0.4]), np.array([-0.2]), np.array([0.1])]
        extended = [np.array([0.4, -0.2]), xs[1], xs[2]]

        original = nlp.consensus_residual(xs)
        residual = reformulated.consensus_residual(extended)
        assert_allclose(residual[: nlp.n_c], original)
        assert_allclose(residual[nlp.n_c :], 0.0)
        assert reformulated.objective(extended) == pytest.approx(nlp.objective(xs))

    def test_bilevel_requires_two_assigned(self, three_assigned_quartic_params):
        nlp = make_quartic_toy(three_assigned_quartic_params)
        config = RunConfig(variant="bilevel-cg")
        with pytest.raises(NotTwoAssigned):
            BilevelAladin(nlp, config)

    @pytest.mark.integration
    def test_minimizer_preserved(self, three_assigned_quartic_params, settings):
        nlp = make_quartic_toy(three_assigned_quartic_params)
        reformulated = reformulate_two_assigned(nlp)
        config = RunConfig(variant="condensed-exact", outer=OuterParams(tol=1e-8, max_iterations=100))

        original = BilevelAladin(nlp, config, settings).solve()
        copied = BilevelAladin(reformulated, config, settings).solve()

        assert original.converged and copied.converged
        restricted = reformulated.restrict_to_original(copied.x)
        for x_copy, x_orig in zip(restricted, original.x):
            assert_allclose(x_copy, x_orig, atol=1e-7)
