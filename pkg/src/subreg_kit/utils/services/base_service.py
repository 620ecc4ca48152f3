"""
Base service class providing the linear-algebra primitives shared by all services.
"""

from typing import Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.config_registry import get_config_or_default
from subreg_kit.utils.core.logger import get_logger

logger = get_logger(__name__)


class BaseService:
    """Rank, kernel and sign-constrained kernel computations."""

    @staticmethod
    def resolve_config(config: Optional[SubregConfig] = None) -> SubregConfig:
        """Return `config`, else the registered global config, else the defaults."""
        return config if config is not None else get_config_or_default()

    @staticmethod
    def numerical_rank(matrix: np.ndarray, tol_rank: float) -> int:
        """Rank with singular values below tol_rank * sigma_max treated as zero."""
        if matrix.size == 0:
            return 0
        s = np.linalg.svd(matrix, compute_uv=False)
        if s[0] == 0.0:
            return 0
        return int(np.sum(s > tol_rank * s[0]))

    @staticmethod
    def kernel(matrix: np.ndarray, tol_rank: float, dim: Optional[int] = None) -> np.ndarray:
        """Orthonormal kernel basis, columns. An empty matrix has the whole space as kernel."""
        if matrix.size == 0:
            d = dim if dim is not None else matrix.shape[1]
            return np.eye(d)
        s = np.linalg.svd(matrix, compute_uv=False)
        if s[0] == 0.0:
            return np.eye(matrix.shape[1])
        return null_space(matrix, rcond=tol_rank)

    @staticmethod
    def nonzero_signed_kernel_vector(
        R: np.ndarray, signed: list[int], tol_rank: float
    ) -> Optional[np.ndarray]:
        """A nonzero c with R c = 0 and c[signed] >= 0, or None when only c = 0 qualifies.

        Args:
            R: (rows, cols) matrix.
            signed: column indices whose entries must be non-negative.
            tol_rank: relative rank tolerance.

        Returns:
            Optional[np.ndarray]: Unit-norm witness or None.
        """
        cols = R.shape[1]
        if cols == 0:
            return None
        N = BaseService.kernel(R, tol_rank, cols) if R.shape[0] else np.eye(cols)
        if N.shape[1] == 0:
            return None

        if not signed:
            c = N[:, 0]
            return c / np.linalg.norm(c)

        Ns = N[signed]
        if BaseService.numerical_rank(Ns, tol_rank) < N.shape[1]:
            w = BaseService.kernel(Ns, tol_rank, N.shape[1])[:, 0]
            c = N @ w
            return c / np.linalg.norm(c)

        result = linprog(
            c=np.zeros(N.shape[1]),
            A_ub=-Ns,
            b_ub=np.zeros(len(signed)),
            A_eq=np.ones((1, len(signed))) @ Ns,
            b_eq=np.ones(1),
            bounds=[(None, None)] * N.shape[1],
            method="highs",
        )
        if not result.success:
            return None
        c = N @ result.x
        c[signed] = np.maximum(c[signed], 0.0)
        return c / np.linalg.norm(c)

    @staticmethod
    def convex_zero_combination(rows: np.ndarray) -> Optional[np.ndarray]:
        """λ >= 0 with Σλ = 1 and Σ λ_i rows_i = 0, or None if no such λ exists."""
        count = rows.shape[0]
        if count == 0:
            return None
        A_eq = np.vstack([rows.T, np.ones((1, count))])
        b_eq = np.concatenate([np.zeros(rows.shape[1]), [1.0]])
        result = linprog(
            c=np.zeros(count),
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=[(0.0, None)] * count,
            method="highs",
        )
        if not result.success:
            return None
        return result.x

    @staticmethod
    def strictly_negative_direction(
        rows: np.ndarray, equality_rows: np.ndarray
    ) -> Optional[np.ndarray]:
        """ξ with equality_rows ξ = 0 and rows ξ <= -1, or None if infeasible."""
        if rows.shape[0] == 0:
            return np.zeros(rows.shape[1])
        d = rows.shape[1]
        result = linprog(
            c=np.zeros(d),
            A_ub=rows,
            b_ub=-np.ones(rows.shape[0]),
            A_eq=equality_rows if equality_rows.shape[0] else None,
            b_eq=np.zeros(equality_rows.shape[0]) if equality_rows.shape[0] else None,
            bounds=[(None, None)] * d,
            method="highs",
        )
        if not result.success:
            return None
        return result.x
