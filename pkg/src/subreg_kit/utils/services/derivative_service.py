"""
Service for evaluating fields and checking their derivative oracles.
"""

from typing import Optional, Sequence

import numpy as np

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data.models import FieldValue, FiniteDifferenceReport, ScalarField
from subreg_kit.utils.services.base_service import BaseService

logger = get_logger(__name__)


class DerivativeService(BaseService):
    """Field evaluation with validation, and Taylor-remainder checks."""

    @staticmethod
    def evaluate_with_derivatives(field: ScalarField, point: np.ndarray) -> FieldValue:
        """Evaluate `field` at `point`, validating shapes and symmetrizing the Hessian.

        Raises:
            ProblemInputError: If the point dimension does not match the field.
            ArithmeticError: If the oracle returns non-finite values.
        """
        point = np.asarray(point, dtype=float).reshape(-1)
        if point.shape[0] != field.dimension:
            raise ProblemInputError(
                f"Point has dimension {point.shape[0]}, field expects {field.dimension}"
            )
        fv = field.evaluate(point)
        if not (np.isfinite(fv.value) and np.all(np.isfinite(fv.gradient))
                and np.all(np.isfinite(fv.hessian))):
            raise ArithmeticError(f"Non-finite derivative data from {field!r} at {point}")
        asymmetry = float(np.max(np.abs(fv.hessian - fv.hessian.T))) if fv.hessian.size else 0.0
        if asymmetry > 1e-12 * max(1.0, float(np.max(np.abs(fv.hessian)))):
            logger.warning(f"Hessian of {field!r} asymmetric by {asymmetry:.3e}; symmetrizing")
        return FieldValue(fv.value, fv.gradient, 0.5 * (fv.hessian + fv.hessian.T))

    @staticmethod
    def finite_difference_check(
        field: ScalarField,
        point: np.ndarray,
        steps: Sequence[float] = (1e-1, 1e-2, 1e-3),
        tol: float = 1e-6,
        order_threshold: float = 2.5,
    ) -> FiniteDifferenceReport:
        """Check gradient and Hessian through second-order Taylor remainders.

        For every step h the remainder |f(x+Δ) - f(x) - ∇f·Δ - ½ΔᵀHΔ| is maximised over
        Δ = ±h·e_k and ±h·(e_k + e_l)/√2. The oracle passes when every remainder is
        below `tol`, or, with at least two steps, when the remainders decay faster
        than h^order_threshold.

        Returns:
            FiniteDifferenceReport: Per-step remainders, observed order and verdict.
        """
        x = np.asarray(point, dtype=float).reshape(-1)
        base = DerivativeService.evaluate_with_derivatives(field, x)
        d = field.dimension

        directions = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = 1.0
            directions.extend([e, -e])
            for l in range(k + 1, d):
                e2 = np.zeros(d)
                e2[k] = e2[l] = 1.0 / np.sqrt(2.0)
                directions.extend([e2, -e2])

        remainders = []
        for h in steps:
            worst = 0.0
            for direction in directions:
                delta = h * direction
                model = base.value + base.gradient @ delta + 0.5 * delta @ base.hessian @ delta
                worst = max(worst, abs(field.value(x + delta) - model))
            remainders.append(worst)

        scale = max(1.0, abs(base.value))
        below_tol = all(r <= tol * scale for r in remainders)

        observed: Optional[float] = None
        decays = False
        if len(steps) >= 2:
            orders = []
            for (h1, r1), (h2, r2) in zip(zip(steps, remainders), zip(steps[1:], remainders[1:])):
                floor = 1e-13 * scale
                if r1 <= floor or r2 <= floor:
                    continue
                orders.append(np.log(r1 / r2) / np.log(h1 / h2))
            if orders:
                observed = float(min(orders))
                decays = observed >= order_threshold
            else:
                decays = True

        passed = below_tol or decays
        if passed:
            reason = "remainders within tolerance" if below_tol else "super-quadratic decay"
        else:
            reason = (
                f"remainders decay with order {observed:.2f}"
                if observed is not None
                else "remainders exceed tolerance"
            )
        logger.debug(f"Finite-difference check of {field!r}: {reason}")
        return FiniteDifferenceReport(tuple(float(s) for s in steps), tuple(remainders),
                                      observed, passed, reason)
