"""
Service for coercivity certificates of quadratic forms on polyhedral cones.

The cone {v : Av <= 0, Bv = 0} is first reduced to the kernel of B and the weak-norm
Gram is turned into the identity by a Cholesky change of variables. The minimum of
the form over cone ∩ sphere is then attained at an eigenvector of the form
restricted to some face {A_S v = 0}, so enumerating faces gives the exact constant.
Large instances fall back to a projected power method that can refute but never
certify.
"""

from itertools import combinations
from typing import Optional

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular
from scipy.optimize import linprog

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import CoercivityCertificate, PolyhedralCone, QuadraticFormRep
from subreg_kit.utils.services.base_service import BaseService

logger = get_logger(__name__)

_MEMBER_TOL = 1e-9
_VACUOUS_NOTE = (
    "cone is {0}: coercivity holds vacuously; for control problems this does not "
    "imply local minimality (see the example1 counterexample)"
)


def _cone_point_in_span(A: np.ndarray, V: np.ndarray) -> Optional[np.ndarray]:
    """A nonzero y in span(V) with A y <= 0, or None."""
    if V.shape[1] == 1:
        v = V[:, 0]
        for s in (1.0, -1.0):
            if A.shape[0] == 0 or np.max(A @ (s * v)) <= _MEMBER_TOL:
                return s * v
        return None
    if A.shape[0] == 0:
        return V[:, 0]
    AV = A @ V
    c = V.shape[1]
    for j in range(c):
        for s in (1.0, -1.0):
            A_eq = np.zeros((1, c))
            A_eq[0, j] = 1.0
            result = linprog(
                np.zeros(c),
                A_ub=AV,
                b_ub=np.zeros(A.shape[0]),
                A_eq=A_eq,
                b_eq=[s],
                bounds=[(None, None)] * c,
                method="highs",
            )
            if result.success:
                y = V @ result.x
                return y / np.linalg.norm(y)
    return None


def _eigen_clusters(values: np.ndarray) -> list[list[int]]:
    scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
    clusters: list[list[int]] = []
    for i, value in enumerate(values):
        if clusters and abs(value - values[clusters[-1][-1]]) <= 1e-9 * scale:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


class ConeService(BaseService):
    """certify_coercivity and its building blocks."""

    @staticmethod
    def reduce(
        form: QuadraticFormRep, cone: PolyhedralCone, tol_rank: float
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Reduced form M, rows A (unit norm, zero rows dropped) and back-map T with v = T y."""
        if form.matrix.shape != (cone.dim, cone.dim):
            raise ProblemInputError(
                f"Form has shape {form.matrix.shape}, cone lives in R^{cone.dim}"
            )
        Z = ConeService.kernel(cone.B, tol_rank, cone.dim) if cone.B.shape[0] else np.eye(cone.dim)
        if Z.shape[1] == 0:
            return np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((cone.dim, 0))
        gram = Z.T @ form.weak_norm_gram @ Z
        L = cholesky(0.5 * (gram + gram.T), lower=True)
        T = Z @ solve_triangular(L, np.eye(L.shape[0]), lower=True).T
        M = T.T @ form.matrix @ T
        M = 0.5 * (M + M.T)
        A = cone.A @ T
        norms = np.linalg.norm(A, axis=1)
        scale = max(1.0, float(np.max(np.linalg.norm(cone.A, axis=1), initial=0.0)))
        keep = norms > 1e-10 * scale
        A = A[keep] / norms[keep, None]
        return M, A, T

    @staticmethod
    def face_minimum(
        M: np.ndarray, A: np.ndarray, face: tuple[int, ...], tol_rank: float
    ) -> Optional[tuple[float, np.ndarray]]:
        """Smallest eigenvalue of M on {A_S y = 0} whose eigenspace meets the cone."""
        d = M.shape[0]
        Z = ConeService.kernel(A[list(face)], tol_rank, d) if face else np.eye(d)
        if Z.shape[1] == 0:
            return None
        values, vectors = eigh(Z.T @ M @ Z)
        for cluster in _eigen_clusters(values):
            y = _cone_point_in_span(A, Z @ vectors[:, cluster])
            if y is not None:
                return float(np.mean(values[cluster])), y / np.linalg.norm(y)
        return None

    @staticmethod
    def exact_minimum(
        M: np.ndarray, A: np.ndarray, tol_rank: float
    ) -> tuple[Optional[float], Optional[np.ndarray], int]:
        """Minimum of yᵀMy over cone ∩ unit sphere by face enumeration."""
        d, r = M.shape[0], A.shape[0]
        best_value: Optional[float] = None
        best_y: Optional[np.ndarray] = None
        examined = 0
        for size in range(0, min(r, d - 1) + 1):
            for face in combinations(range(r), size):
                if size and ConeService.numerical_rank(A[list(face)], tol_rank) < size:
                    continue
                examined += 1
                found = ConeService.face_minimum(M, A, face, tol_rank)
                if found is not None and (best_value is None or found[0] < best_value):
                    best_value, best_y = found
        return best_value, best_y, examined

    @staticmethod
    def sampled_minimum(
        M: np.ndarray,
        A: np.ndarray,
        restarts: int,
        seed: int,
        tol_rank: float,
        iterations: int = C.SAMPLED_ITERATIONS,
    ) -> tuple[Optional[float], Optional[np.ndarray]]:
        """Projected power iterations on σI - M over the cone, polished on the final face.

        Every returned point is a genuine cone member, so the value is an upper bound
        on the true minimum.
        """
        d = M.shape[0]
        cone = PolyhedralCone.from_rows(d, A, None)
        sigma = float(np.linalg.norm(M, 2)) + 1.0
        shifted = sigma * np.eye(d) - M
        rng = np.random.default_rng(seed)
        best_value: Optional[float] = None
        best_y: Optional[np.ndarray] = None

        def consider(value: float, y: np.ndarray) -> None:
            nonlocal best_value, best_y
            if best_value is None or value < best_value:
                best_value, best_y = value, y

        for _ in range(restarts):
            y = cone.project(rng.normal(size=d))
            if np.linalg.norm(y) <= 1e-12:
                continue
            y /= np.linalg.norm(y)
            for _ in range(iterations):
                nxt = cone.project(shifted @ y)
                norm = np.linalg.norm(nxt)
                if norm <= 1e-14:
                    break
                nxt /= norm
                if np.linalg.norm(nxt - y) <= 1e-12:
                    y = nxt
                    break
                y = nxt
            if A.shape[0] and np.max(A @ y) > 1e-7:
                continue
            consider(float(y @ M @ y), y)
            face = ()
            if A.shape[0]:
                face = tuple(int(i) for i in np.flatnonzero(np.abs(A @ y) <= 1e-7))
            polished = ConeService.face_minimum(M, A, face, tol_rank)
            if polished is not None:
                consider(*polished)
        return best_value, best_y

    @staticmethod
    def certify_coercivity(
        form: QuadraticFormRep, cone: PolyhedralCone, config: Optional[SubregConfig] = None
    ) -> CoercivityCertificate:
        """Certify Ω(v) >= c0 (‖v‖′)² on the cone.

        Exact when the reduced cone has no inequality rows, or at most d_max
        dimensions and row_cap rows; otherwise sampled (never certifying, but a
        non-positive sampled value is a genuine counterexample).
        """
        config = ConeService.resolve_config(config)
        M, A, T = ConeService.reduce(form, cone, config.tol_rank)
        d, r = M.shape[0], A.shape[0]

        def back(y: Optional[np.ndarray]) -> Optional[np.ndarray]:
            return None if y is None else T @ y

        if d == 0:
            logger.warning(_VACUOUS_NOTE)
            return CoercivityCertificate(True, float("inf"), "vacuous", notes=(_VACUOUS_NOTE,))

        if r == 0 or (d <= config.d_max and r <= config.row_cap):
            value, y, examined = ConeService.exact_minimum(M, A, config.tol_rank)
            if value is None:
                logger.warning(_VACUOUS_NOTE)
                return CoercivityCertificate(
                    True, float("inf"), "vacuous", faces_examined=examined, notes=(_VACUOUS_NOTE,)
                )
            certified = value > config.tol_pd
            logger.debug(
                f"Exact coercivity: c0={value:.6g} over {examined} faces (d={d}, rows={r})"
            )
            return CoercivityCertificate(
                certified,
                value,
                "exact",
                counterexample=None if certified else back(y),
                faces_examined=examined,
                refuted=not certified,
                minimizer=back(y),
            )

        value, y = ConeService.sampled_minimum(
            M, A, config.sampled_restarts, config.seed, config.tol_rank
        )
        note = (
            f"reduced dimension {d} with {r} rows exceeds caps "
            f"(d_max={config.d_max}, row_cap={config.row_cap})"
        )
        logger.warning(f"Sampled coercivity evidence only: {note}")
        if value is None:
            return CoercivityCertificate(False, float("nan"), "sampled", notes=(note,))
        refuted = value <= config.tol_pd
        return CoercivityCertificate(
            False,
            value,
            "sampled",
            counterexample=back(y) if refuted else None,
            refuted=refuted,
            notes=(note,),
            minimizer=back(y),
        )
