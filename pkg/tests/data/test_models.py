import numpy as np
import pytest

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.models import (
    CheckResult,
    Mesh,
    NlpProblem,
    NlpTuple,
    PerturbationSpec,
    PolyhedralCone,
)
from subreg_kit.utils.data.polynomial import PolynomialField


class TestMesh:
    def test_step_and_nodes(self):
        mesh = Mesh(4)
        assert mesh.h == pytest.approx(0.25)
        np.testing.assert_allclose(mesh.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(mesh.left_nodes, [0.0, 0.25, 0.5, 0.75])

    def test_shifted_horizon(self):
        mesh = Mesh(10, 1.0, 3.0)
        assert mesh.h == pytest.approx(0.2)
        assert mesh.length == pytest.approx(2.0)

    @pytest.mark.parametrize("n_intervals", [1, 0, -3])
    def test_rejects_fewer_than_two_intervals(self, n_intervals):
        with pytest.raises(ProblemInputError):
            Mesh(n_intervals)

    def test_rejects_reversed_horizon(self):
        with pytest.raises(ProblemInputError):
            Mesh(5, 1.0, 0.0)


class TestPolyhedralCone:
    def test_half_line_membership(self):
        cone = PolyhedralCone.from_rows(2, ineq=[[0.0, 1.0]], eq=[[1.0, 0.0]])
        assert cone.contains(np.array([0.0, -2.0]))
        assert not cone.contains(np.array([0.0, 1.0]))
        assert not cone.contains(np.array([1.0, -1.0]))

    def test_full_space_without_rows(self):
        cone = PolyhedralCone.from_rows(3)
        assert cone.A.shape == (0, 3)
        assert cone.B.shape == (0, 3)
        assert cone.contains(np.array([5.0, -1.0, 2.0]))
        np.testing.assert_allclose(cone.equality_basis(), np.eye(3))

    def test_projection_onto_nonnegative_orthant(self):
        cone = PolyhedralCone.from_rows(2, ineq=-np.eye(2))
        np.testing.assert_allclose(cone.project(np.array([1.0, -2.0])), [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(cone.project(np.array([3.0, 4.0])), [3.0, 4.0], atol=1e-12)

    def test_projection_onto_line(self):
        cone = PolyhedralCone.from_rows(2, eq=[[1.0, 1.0]])
        projected = cone.project(np.array([1.0, 0.0]))
        np.testing.assert_allclose(projected, [0.5, -0.5], atol=1e-12)
        assert cone.contains(projected)

    def test_projection_onto_zero_cone(self):
        cone = PolyhedralCone.from_rows(2, eq=np.eye(2))
        np.testing.assert_allclose(cone.project(np.array([1.0, 2.0])), [0.0, 0.0])


class TestNlpProblem:
    def test_counts(self):
        x = PolynomialField.from_terms(1, [(1.0, {0: 1})])
        problem = NlpProblem(1, x, (x, x), ())
        assert (problem.n, problem.m, problem.k) == (1, 2, 0)
        assert problem.kind == "nlp"

    def test_field_dimension_mismatch(self):
        objective = PolynomialField.from_terms(2, [(1.0, {0: 2})])
        with pytest.raises(ProblemInputError):
            NlpProblem(1, objective)

    def test_tuple_of_normalizes_shapes(self):
        point = NlpTuple.of(0.5)
        assert point.x.shape == (1,)
        assert point.lam.shape == (0,)
        assert point.y.shape == (0,)


def test_perturbation_spec_rejects_unknown_blocks():
    with pytest.raises(ProblemInputError, match="omega"):
        PerturbationSpec("nlp", {"xi": (1,)}, enabled=("xi", "omega"))


def test_check_result_value_is_first_entry():
    assert CheckResult("X", "pass", {"a": 1, "b": 2}).value == 1
    assert CheckResult("X", "pass").value == ""
