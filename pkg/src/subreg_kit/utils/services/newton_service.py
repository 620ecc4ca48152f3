"""
Active-set damped Newton solver for perturbed KKT systems.

Every perturbed optimality system handled by the harness is the KKT system of a
smooth program min J(z) s.t. c(z) <= 0, g(z) = 0 on a finite decision vector z. A
model exposes value, gradient, constraint values and Jacobians, and the Hessian of
the Lagrangian at given multipliers; this service guesses active sets and solves
the resulting equality systems.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import PerturbedSolution
from subreg_kit.utils.services.base_service import BaseService

logger = get_logger(__name__)


@dataclass(frozen=True)
class KktEvaluation:
    """Model data at one point; `hessian` is the Hessian of the Lagrangian."""

    objective: float
    gradient: np.ndarray
    ineq: np.ndarray
    ineq_jac: np.ndarray
    eq: np.ndarray
    eq_jac: np.ndarray
    hessian: Optional[np.ndarray] = None


class KktModel(Protocol):
    dim: int
    n_ineq: int
    n_eq: int

    def evaluate(
        self, z: np.ndarray, ineq_mult: np.ndarray, eq_mult: np.ndarray, hessian: bool = True
    ) -> KktEvaluation: ...


@dataclass(frozen=True)
class KktPoint:
    """Primal point with full-length inequality and equality multipliers."""

    z: np.ndarray
    ineq_mult: np.ndarray
    eq_mult: np.ndarray


@dataclass(frozen=True)
class NewtonResult:
    point: KktPoint
    active: frozenset[int]
    iterations: int
    residual: float
    evaluation: KktEvaluation


def _factor_and_solve(matrix: np.ndarray, rhs: np.ndarray) -> Optional[np.ndarray]:
    """LU solve, or None when the matrix is numerically singular."""
    if matrix.shape[0] == 0:
        return np.zeros(0)
    lu, piv = lu_factor(matrix, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * max(1.0, pivots.max()):
        return None
    return lu_solve((lu, piv), rhs, check_finite=False)


class NewtonService(BaseService):
    """Equality-constrained Newton solves on guessed active sets, and the branch search."""

    @staticmethod
    def kkt_residual_vector(
        evaluation: KktEvaluation, active: list[int], mu: np.ndarray, y: np.ndarray
    ) -> np.ndarray:
        stationarity = evaluation.gradient + evaluation.ineq_jac[active].T @ mu
        if evaluation.eq_jac.shape[0]:
            stationarity = stationarity + evaluation.eq_jac.T @ y
        return np.concatenate([stationarity, evaluation.ineq[active], evaluation.eq])

    @staticmethod
    def solve_active_set(
        model: KktModel,
        start: KktPoint,
        active: frozenset[int],
        tol: float,
        step_cap: float,
        max_iter: int = C.NEWTON_MAX_ITER,
        rng: Optional[np.random.Generator] = None,
    ) -> Optional[NewtonResult]:
        """Damped Newton on the KKT equations with `active` inequalities treated as equalities.

        Steps are capped at `step_cap` in the max-norm of z and backtracked on the
        Euclidean residual norm. A singular KKT matrix at the start triggers one
        restart from a jittered point (requires `rng`); any later singularity aborts.

        Returns:
            Optional[NewtonResult]: The converged point, or None.
        """
        A = sorted(active)
        n, r_eq = model.dim, model.n_eq
        z = np.array(start.z, dtype=float)
        mu = np.array(start.ineq_mult, dtype=float)[A] if A else np.zeros(0)
        y = np.array(start.eq_mult, dtype=float)

        def full_mu(values: np.ndarray) -> np.ndarray:
            out = np.zeros(model.n_ineq)
            out[A] = values
            return out

        def evaluate(zz: np.ndarray, mm: np.ndarray, yy: np.ndarray):
            try:
                ev = model.evaluate(zz, full_mu(mm), yy, hessian=True)
            except ArithmeticError:
                return None, None
            res = NewtonService.kkt_residual_vector(ev, A, mm, yy)
            if not np.all(np.isfinite(res)):
                return None, None
            return ev, res

        ev, res = evaluate(z, mu, y)
        if ev is None:
            return None

        jittered = False
        iterations = 0
        while True:
            worst = float(np.max(np.abs(res), initial=0.0))
            if worst <= tol:
                return NewtonResult(
                    KktPoint(z, full_mu(mu), y), frozenset(A), iterations, worst, ev
                )
            if iterations >= max_iter:
                logger.debug(f"Newton hit {max_iter} iterations on active set of size {len(A)}")
                return None

            JA = ev.ineq_jac[A]
            Jg = ev.eq_jac
            size = n + len(A) + r_eq
            K = np.zeros((size, size))
            K[:n, :n] = ev.hessian
            K[:n, n : n + len(A)] = JA.T
            K[n : n + len(A), :n] = JA
            K[:n, n + len(A) :] = Jg.T
            K[n + len(A) :, :n] = Jg
            step = _factor_and_solve(K, -res)

            if step is None:
                if iterations == 0 and not jittered and rng is not None:
                    jitter = rng.normal(size=n)
                    z = z + 0.1 * step_cap * jitter / max(np.max(np.abs(jitter)), 1e-300)
                    jittered = True
                    ev, res = evaluate(z, mu, y)
                    if ev is None:
                        return None
                    logger.debug("Singular KKT matrix at start; restarted from jittered point")
                    continue
                return None

            dz, dmu, dy = step[:n], step[n : n + len(A)], step[n + len(A) :]
            largest = float(np.max(np.abs(dz), initial=0.0))
            t = min(1.0, step_cap / largest) if largest > 0 else 1.0
            base = float(np.linalg.norm(res))
            for _ in range(30):
                ev_t, res_t = evaluate(z + t * dz, mu + t * dmu, y + t * dy)
                if ev_t is not None and np.linalg.norm(res_t) <= (1.0 - 1e-4 * t) * base:
                    break
                t *= 0.5
            else:
                logger.debug("Line search failed")
                return None
            z, mu, y = z + t * dz, mu + t * dmu, y + t * dy
            ev, res = ev_t, res_t
            iterations += 1

    @staticmethod
    def branch_search(
        model: KktModel,
        reference: KktPoint,
        reference_active: frozenset[int],
        margins: np.ndarray,
        config: SubregConfig,
        accept: Callable[[NewtonResult], Optional[PerturbedSolution]],
        step_cap: float,
        rng: Optional[np.random.Generator] = None,
    ) -> list[PerturbedSolution]:
        """Collect every converged, admissible branch near the reference point.

        The reference active set is tried first and corrected by up to
        PDAS_CORRECTIONS primal-dual updates. Then each index whose margin (|λ̂| if
        active, |c(ẑ)| otherwise) is at most `config.flip_margin` is flipped alone,
        smallest margin first, at most `config.flip_budget` times. `accept` turns a
        valid Newton result into a solution or rejects it (e.g. outside the radius).
        """
        reference_eval = model.evaluate(
            reference.z, reference.ineq_mult, reference.eq_mult, hessian=False
        )
        scale = max(1.0, float(np.max(np.abs(reference_eval.gradient), initial=0.0)))
        tol = config.tol_newton * scale

        solutions: list[PerturbedSolution] = []
        tried: set[frozenset[int]] = set()

        def attempt(active: frozenset[int]) -> Optional[frozenset[int]]:
            """Solve on `active`; record a valid result, else return the corrected set."""
            tried.add(active)
            result = NewtonService.solve_active_set(
                model, reference, active, tol, step_cap, rng=rng
            )
            if result is None:
                return None
            mult = result.point.ineq_mult
            ineq = result.evaluation.ineq
            t_act = config.tol_act * (1.0 + float(np.max(np.abs(ineq), initial=0.0)))
            negative = {i for i in active if mult[i] < -config.tol_mul}
            violated = {i for i in range(model.n_ineq) if i not in active and ineq[i] > t_act}
            if not negative and not violated:
                solution = accept(result)
                if solution is not None and not any(
                    np.max(np.abs(solution.z - s.z), initial=0.0) <= 1e-8 for s in solutions
                ):
                    solutions.append(solution)
                return None
            return frozenset((set(active) - negative) | violated)

        active: Optional[frozenset[int]] = frozenset(reference_active)
        for _ in range(C.PDAS_CORRECTIONS + 1):
            if active is None or active in tried:
                break
            active = attempt(active)

        candidates = sorted(
            (i for i in range(model.n_ineq) if margins[i] <= config.flip_margin),
            key=lambda i: (margins[i], i),
        )[: config.flip_budget]
        for index in candidates:
            flipped = frozenset(set(reference_active) ^ {index})
            if flipped not in tried:
                attempt(flipped)

        logger.debug(f"Branch search tried {len(tried)} active sets, kept {len(solutions)}")
        return solutions
