"""Самопроверка производных конечными разностями"""

import numpy as np
import pytest

from aladin.models.nlp import AgentProblem, PartitionedNlp
from aladin.models.problems import RandomQpParams
from aladin.services.diagnostics import validate_consistency
from aladin.services.problems import make_quartic_toy, make_random_consensus_qp, make_robot_ocp


@pytest.mark.unit
class TestValidateConsistency:
    def test_quartic_is_consistent(self, settings):
        assert validate_consistency(make_quartic_toy(), settings) == []

    def test_random_qp_is_consistent(self, settings):
        nlp = make_random_consensus_qp(RandomQpParams(n_eq=2, dims=5), seed=3)
        assert validate_consistency(nlp, settings) == []

    @pytest.mark.integration
    def test_robot_is_consistent(self, settings):
        assert validate_consistency(make_robot_ocp(), settings) == []

    def test_wrong_gradient_reported(self, settings):
        agent = AgentProblem(
            name="broken",
            dim=2,
            objective=lambda x: float(x @ x),
            gradient=lambda x: 3.0 * x,
            hessian=lambda x: 2.0 * np.eye(2),
            x0=[0.5, -0.5],
            lower=[-1.0, -1.0],
            upper=[1.0, 1.0],
        )
        nlp = PartitionedNlp(agents=[agent], coupling=[np.ones((1, 2))], n_c=1)
        report = validate_consistency(nlp, settings)

        kinds = {violation.kind for violation in report}
        assert "gradient" in kinds
        assert "hessian" in kinds
        gradient = next(v for v in report if v.kind == "gradient")
        assert gradient.agent == 0
        assert gradient.max_relative_error == pytest.approx(0.5, rel=1e-3)

    def test_wrong_constraint_jacobian_reported(self, settings):
        agent = AgentProblem(
            name="broken-ineq",
            dim=1,
            objective=lambda x: float(x[0] ** 2),
            gradient=lambda x: 2.0 * x,
            hessian=lambda x: np.array([[2.0]]),
            n_ineq=1,
            ineq=lambda x: np.array([x[0] ** 2 - 1.0]),
            ineq_jacobian=lambda x: np.array([[x[0]]]),
            x0=[0.5],
            lower=[0.2],
            upper=[1.0],
        )
        nlp = PartitionedNlp(agents=[agent], coupling=[np.ones((1, 1))], n_c=1)
        kinds = {violation.kind for violation in validate_consistency(nlp, settings)}
        assert kinds == {"ineq_jacobian"}
