"""
Polynomial scalar fields with exact derivatives.

A polynomial is stored as a coefficient vector and an integer exponent matrix with
one row per monomial; value, gradient and Hessian are evaluated in closed form.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.models import FieldValue, ScalarField


class PolynomialField(ScalarField):
    """Σ_t c_t Π_k x_k^{e_tk} on R^dimension."""

    def __init__(
        self,
        dimension: int,
        coefficients: Sequence[float],
        exponents: Sequence[Sequence[int]],
        variable_names: Sequence[str] | None = None,
    ):
        if dimension < 1:
            raise ProblemInputError(f"Field dimension must be positive, got {dimension}")
        coeffs = np.asarray(coefficients, dtype=float).reshape(-1)
        exps = np.asarray(exponents, dtype=int).reshape(len(coeffs), dimension)
        if np.any(exps < 0):
            raise ProblemInputError("Polynomial exponents must be non-negative")
        self.dimension = dimension
        self.coefficients, self.exponents = _combine_like_terms(coeffs, exps)
        self.variable_names = tuple(variable_names) if variable_names else tuple(
            f"x{i + 1}" for i in range(dimension)
        )

    # region Constructors

    @classmethod
    def constant(cls, dimension: int, value: float) -> "PolynomialField":
        return cls(dimension, [value], [[0] * dimension])

    @classmethod
    def from_terms(
        cls,
        dimension: int,
        terms: Iterable[tuple[float, dict[int, int]]],
        variable_names: Sequence[str] | None = None,
    ) -> "PolynomialField":
        """Build from (coefficient, {variable index: power}) pairs."""
        coeffs, exps = [], []
        for coef, powers in terms:
            row = [0] * dimension
            for idx, power in powers.items():
                if not 0 <= idx < dimension:
                    raise ProblemInputError(f"Variable index {idx} outside 0..{dimension - 1}")
                row[idx] += power
            coeffs.append(coef)
            exps.append(row)
        if not coeffs:
            coeffs, exps = [0.0], [[0] * dimension]
        return cls(dimension, coeffs, exps, variable_names)

    # endregion

    @property
    def degree(self) -> int:
        if len(self.coefficients) == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def _monomials(self, x: np.ndarray, exps: np.ndarray) -> np.ndarray:
        return np.prod(np.power(x[None, :], exps), axis=1)

    def value(self, point: np.ndarray) -> float:
        x = np.asarray(point, dtype=float).reshape(-1)
        if x.shape[0] != self.dimension:
            raise ProblemInputError(
                f"Point has dimension {x.shape[0]}, field expects {self.dimension}"
            )
        if len(self.coefficients) == 0:
            return 0.0
        return float(self.coefficients @ self._monomials(x, self.exponents))

    def evaluate(self, point: np.ndarray) -> FieldValue:
        x = np.asarray(point, dtype=float).reshape(-1)
        if x.shape[0] != self.dimension:
            raise ProblemInputError(
                f"Point has dimension {x.shape[0]}, field expects {self.dimension}"
            )
        c, E = self.coefficients, self.exponents
        d = self.dimension
        value = float(c @ self._monomials(x, E)) if len(c) else 0.0

        gradient = np.zeros(d)
        hessian = np.zeros((d, d))
        for k in range(d):
            ek = E[:, k]
            mask = ek > 0
            if not mask.any():
                continue
            Ek = E[mask].copy()
            ck = c[mask] * ek[mask]
            Ek[:, k] -= 1
            gradient[k] = ck @ self._monomials(x, Ek)
            for l in range(k, d):
                el = Ek[:, l]
                inner = el > 0
                if not inner.any():
                    continue
                Ekl = Ek[inner].copy()
                ckl = ck[inner] * el[inner]
                Ekl[:, l] -= 1
                hessian[k, l] = ckl @ self._monomials(x, Ekl)
                hessian[l, k] = hessian[k, l]
        return FieldValue(value, gradient, hessian)

    def values_many(self, points: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        if X.shape[1] != self.dimension:
            raise ProblemInputError(
                f"Points have dimension {X.shape[1]}, field expects {self.dimension}"
            )
        if len(self.coefficients) == 0:
            return np.zeros(X.shape[0])
        powers = np.power(X[:, None, :], self.exponents[None, :, :])
        return np.prod(powers, axis=2) @ self.coefficients

    def evaluate_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        if X.shape[1] != self.dimension:
            raise ProblemInputError(
                f"Points have dimension {X.shape[1]}, field expects {self.dimension}"
            )
        P, d = X.shape
        c, E = self.coefficients, self.exponents
        values = np.zeros(P)
        gradients = np.zeros((P, d))
        hessians = np.zeros((P, d, d))
        if len(c) == 0:
            return values, gradients, hessians

        def monomials(exps: np.ndarray) -> np.ndarray:
            return np.prod(np.power(X[:, None, :], exps[None, :, :]), axis=2)

        values = monomials(E) @ c
        for k in range(d):
            mask = E[:, k] > 0
            if not mask.any():
                continue
            Ek = E[mask].copy()
            ck = c[mask] * Ek[:, k]
            Ek[:, k] -= 1
            gradients[:, k] = monomials(Ek) @ ck
            for l in range(k, d):
                inner = Ek[:, l] > 0
                if not inner.any():
                    continue
                Ekl = Ek[inner].copy()
                ckl = ck[inner] * Ekl[:, l]
                Ekl[:, l] -= 1
                hessians[:, k, l] = monomials(Ekl) @ ckl
                hessians[:, l, k] = hessians[:, k, l]
        return values, gradients, hessians

    def terms(self) -> list[tuple[float, tuple[int, ...]]]:
        return [
            (float(c), tuple(int(e) for e in row))
            for c, row in zip(self.coefficients, self.exponents)
        ]

    def to_text(self) -> str:
        """Render in the problem-file term grammar with round-trippable coefficients."""
        pieces = []
        for coef, row in self.terms():
            factors = [repr(abs(coef))]
            for name, power in zip(self.variable_names, row):
                if power == 1:
                    factors.append(name)
                elif power > 1:
                    factors.append(f"{name}^{power}")
            body = " * ".join(factors)
            if not pieces:
                pieces.append(f"-{body}" if coef < 0 else body)
            else:
                pieces.append(f"- {body}" if coef < 0 else f"+ {body}")
        return " ".join(pieces) if pieces else "0.0"

    def __repr__(self) -> str:
        return f"PolynomialField({self.to_text()})"


def _combine_like_terms(coeffs: np.ndarray, exps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    merged: dict[tuple[int, ...], float] = {}
    for c, row in zip(coeffs, exps):
        key = tuple(int(e) for e in row)
        merged[key] = merged.get(key, 0.0) + float(c)
    kept = [(c, key) for key, c in merged.items() if c != 0.0]
    if not kept:
        return np.zeros(0), np.zeros((0, exps.shape[1]), dtype=int)
    return (
        np.array([c for c, _ in kept]),
        np.array([key for _, key in kept], dtype=int).reshape(len(kept), exps.shape[1]),
    )
