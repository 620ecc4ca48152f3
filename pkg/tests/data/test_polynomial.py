import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.polynomial import PolynomialField


def sum_of_squares():
    return PolynomialField.from_terms(2, [(1.0, {0: 2}), (1.0, {1: 2})])


def test_sum_of_squares_value_gradient_hessian():
    result = sum_of_squares().evaluate(np.array([1.0, 2.0]))
    assert result.value == pytest.approx(5.0)
    np.testing.assert_allclose(result.gradient, [2.0, 4.0])
    np.testing.assert_allclose(result.hessian, np.diag([2.0, 2.0]))


def test_affine_field_has_zero_hessian():
    g = PolynomialField.from_terms(2, [(1.0, {0: 1}), (1.0, {1: 1}), (-1.0, {})])
    result = g.evaluate(np.array([0.5, 0.5]))
    assert result.value == pytest.approx(0.0)
    np.testing.assert_allclose(result.gradient, [1.0, 1.0])
    np.testing.assert_allclose(result.hessian, np.zeros((2, 2)))


def test_bilinear_field():
    result = PolynomialField.from_terms(2, [(1.0, {0: 1, 1: 1})]).evaluate(np.array([3.0, -1.0]))
    assert result.value == pytest.approx(-3.0)
    np.testing.assert_allclose(result.gradient, [-1.0, 3.0])
    np.testing.assert_allclose(result.hessian, [[0.0, 1.0], [1.0, 0.0]])


def test_like_terms_are_combined():
    field = PolynomialField.from_terms(1, [(2.0, {0: 3}), (-2.0, {0: 3}), (1.0, {0: 1})])
    assert field.terms() == [(1.0, (1,))]
    assert field.degree == 1


def test_dimension_mismatch_raises():
    with pytest.raises(ProblemInputError):
        sum_of_squares().evaluate(np.zeros(3))


def test_negative_exponent_rejected():
    with pytest.raises(ProblemInputError):
        PolynomialField(1, [1.0], [[-1]])


def test_evaluate_many_matches_pointwise():
    field = PolynomialField.from_terms(
        2, [(1.5, {0: 3}), (-2.0, {0: 1, 1: 2}), (0.5, {1: 1}), (4.0, {})]
    )
    points = np.array([[0.3, -1.2], [2.0, 0.5], [-0.7, 0.0]])
    values, gradients, hessians = field.evaluate_many(points)
    for i, point in enumerate(points):
        single = field.evaluate(point)
        assert values[i] == pytest.approx(single.value)
        np.testing.assert_allclose(gradients[i], single.gradient)
        np.testing.assert_allclose(hessians[i], single.hessian)
    np.testing.assert_allclose(field.values_many(points), values)


coefficient = st.floats(min_value=-5, max_value=5, allow_nan=False)
exponent = st.integers(min_value=0, max_value=3)


@settings(max_examples=50, deadline=None)
@given(
    terms=st.lists(st.tuples(coefficient, exponent, exponent, exponent), min_size=1, max_size=6),
    point=st.tuples(*[st.floats(min_value=-2, max_value=2, allow_nan=False)] * 3),
)
def test_hessian_is_symmetric(terms, point):
    field = PolynomialField.from_terms(
        3, [(c, {0: a, 1: b, 2: d}) for c, a, b, d in terms]
    )
    hessian = field.evaluate(np.array(point)).hessian
    np.testing.assert_allclose(hessian, hessian.T)


def test_to_text_renders_signs_and_powers():
    field = PolynomialField.from_terms(2, [(-1.0, {0: 1}), (0.5, {1: 2})])
    assert field.to_text() == "-1.0 * x1 + 0.5 * x2^2"
