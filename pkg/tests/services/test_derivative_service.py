import numpy as np
import pytest

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.models import CallableField
from subreg_kit.utils.data.polynomial import PolynomialField
from subreg_kit.utils.services.derivative_service import DerivativeService


def test_quadratic_has_zero_remainder():
    field = PolynomialField.from_terms(
        2, [(3.0, {0: 2}), (-1.0, {0: 1, 1: 1}), (0.5, {1: 2}), (2.0, {0: 1})]
    )
    report = DerivativeService.finite_difference_check(field, np.array([0.4, -1.3]))
    assert report.passed
    assert max(report.remainders) < 1e-12


def test_cubic_remainder_is_step_cubed():
    cubic = PolynomialField.from_terms(1, [(1.0, {0: 3})])
    report = DerivativeService.finite_difference_check(cubic, np.array([1.0]))
    assert report.remainders[1] == pytest.approx(1e-6, rel=1.0)
    assert report.observed_order == pytest.approx(3.0, abs=0.1)
    assert report.passed


def test_wrong_gradient_is_flagged():
    def oracle(x):
        return x[0] ** 2, [2.0 * x[0] + 1.0], [[2.0]]

    report = DerivativeService.finite_difference_check(CallableField(1, oracle), np.array([0.7]))
    assert not report.passed
    assert report.observed_order == pytest.approx(1.0, abs=0.05)
    assert "order" in report.reason


def test_evaluate_symmetrizes_hessian():
    def oracle(x):
        return 0.0, [0.0, 0.0], [[1.0, 2.0], [0.0, 1.0]]

    value = DerivativeService.evaluate_with_derivatives(CallableField(2, oracle), np.zeros(2))
    np.testing.assert_allclose(value.hessian, [[1.0, 1.0], [1.0, 1.0]])


def test_evaluate_rejects_wrong_dimension():
    field = PolynomialField.constant(2, 1.0)
    with pytest.raises(ProblemInputError):
        DerivativeService.evaluate_with_derivatives(field, np.zeros(3))


def test_evaluate_rejects_non_finite_values():
    def oracle(x):
        return float("nan"), [0.0], [[0.0]]

    with pytest.raises(ArithmeticError):
        DerivativeService.evaluate_with_derivatives(CallableField(1, oracle), np.zeros(1))
