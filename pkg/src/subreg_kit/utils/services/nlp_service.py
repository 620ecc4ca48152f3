"""
Service for first- and second-order analysis of nonlinear programs.

Covers active sets, the KKT residual, MFCQ and strict MFCQ, the critical cone, the
Hessian-of-the-Lagrangian quadratic form and sampled quadratic-growth probes. The
perturbed KKT system of a program is exposed as a KktModel for the Newton solver.
"""

from typing import Optional

import numpy as np

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import (
    EmptyNormalConeError,
    PreconditionError,
    ProblemInputError,
    RetractionError,
)
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import (
    ActiveSets,
    GrowthProbeResult,
    KktResidualNlp,
    MfcqResult,
    NlpProblem,
    NlpTuple,
    Perturbation,
    PolyhedralCone,
    QuadraticFormRep,
    StrictMfcqResult,
    evaluate_stack,
)
from subreg_kit.utils.services.base_service import BaseService
from subreg_kit.utils.services.newton_service import KktEvaluation, KktPoint

logger = get_logger(__name__)


def dual_weak_norm(zeta: np.ndarray, gram: Optional[np.ndarray] = None) -> float:
    """‖ζ‖″ = sqrt(ζ G⁻¹ ζᵀ), the dual of ‖v‖′ = sqrt(vᵀ G v)."""
    zeta = np.asarray(zeta, dtype=float)
    if gram is None:
        return float(np.linalg.norm(zeta))
    return float(np.sqrt(max(zeta @ np.linalg.solve(gram, zeta), 0.0)))


def weak_norm(v: np.ndarray, gram: Optional[np.ndarray] = None) -> float:
    v = np.asarray(v, dtype=float)
    if gram is None:
        return float(np.linalg.norm(v))
    return float(np.sqrt(max(v @ gram @ v, 0.0)))


class NlpKktModel:
    """KKT model of min φ(x) - ζ·x s.t. f(x) - ξ <= 0, g(x) - η = 0.

    Its KKT points are exactly the solutions of z ∈ F(s) for z = (ξ, η, ζ).
    """

    def __init__(self, problem: NlpProblem, perturbation: Optional[Perturbation] = None):
        self.problem = problem
        self.dim = problem.n
        self.n_ineq = problem.m
        self.n_eq = problem.k
        blocks = perturbation.blocks if perturbation is not None else {}
        self.xi = np.asarray(blocks.get("xi", np.zeros(problem.m)), dtype=float)
        self.eta = np.asarray(blocks.get("eta", np.zeros(problem.k)), dtype=float)
        self.zeta = np.asarray(blocks.get("zeta", np.zeros(problem.n)), dtype=float)

    def evaluate(
        self, z: np.ndarray, ineq_mult: np.ndarray, eq_mult: np.ndarray, hessian: bool = True
    ) -> KktEvaluation:
        p = self.problem
        obj = p.objective.evaluate(z)
        f, Jf, Hf = evaluate_stack(p.inequalities, z, p.n)
        g, Jg, Hg = evaluate_stack(p.equalities, z, p.n)
        H = None
        if hessian:
            H = (
                obj.hessian
                + np.einsum("i,ijk->jk", ineq_mult, Hf)
                + np.einsum("i,ijk->jk", eq_mult, Hg)
            )
        return KktEvaluation(
            obj.value - float(self.zeta @ z),
            obj.gradient - self.zeta,
            f - self.xi,
            Jf,
            g - self.eta,
            Jg,
            H,
        )


class NlpService(BaseService):
    """Stationarity, constraint qualifications and second-order data of an NlpProblem."""

    @staticmethod
    def check_dimensions(problem: NlpProblem, point: NlpTuple) -> None:
        if point.x.shape != (problem.n,):
            raise ProblemInputError(f"x has shape {point.x.shape}, expected ({problem.n},)")
        if point.lam.shape != (problem.m,):
            raise ProblemInputError(f"lambda has shape {point.lam.shape}, expected ({problem.m},)")
        if point.y.shape != (problem.k,):
            raise ProblemInputError(f"y has shape {point.y.shape}, expected ({problem.k},)")

    @staticmethod
    def reference_point(point: NlpTuple) -> KktPoint:
        return KktPoint(point.x, point.lam, point.y)

    @staticmethod
    def activity_tolerance(values: np.ndarray, config: SubregConfig) -> float:
        return config.tol_act * (1.0 + float(np.max(np.abs(values), initial=0.0)))

    @staticmethod
    def active_sets(
        problem: NlpProblem, point: NlpTuple, config: Optional[SubregConfig] = None
    ) -> ActiveSets:
        """Split the active inequalities by the sign of their multipliers.

        Raises:
            PreconditionError: If x violates a constraint by more than t_act.
        """
        config = NlpService.resolve_config(config)
        NlpService.check_dimensions(problem, point)
        f, _, _ = evaluate_stack(problem.inequalities, point.x, problem.n)
        g, _, _ = evaluate_stack(problem.equalities, point.x, problem.n)
        t_act = NlpService.activity_tolerance(f, config)

        for j, value in enumerate(g):
            if abs(value) > t_act:
                raise PreconditionError(f"Infeasible point: eq[{j}] = {value:.3e}")
        for i, value in enumerate(f):
            if value > t_act:
                raise PreconditionError(f"Infeasible point: ineq[{i}] = {value:.3e} > 0")

        active = tuple(i for i in range(problem.m) if abs(f[i]) <= t_act)
        positive = tuple(i for i in active if point.lam[i] > config.tol_mul)
        zero = tuple(i for i in active if i not in positive)
        return ActiveSets(active, zero, positive)

    @staticmethod
    def kkt_residual(
        problem: NlpProblem, point: NlpTuple, gram: Optional[np.ndarray] = None
    ) -> KktResidualNlp:
        """Residual z = (ξ, η, ζ) with ξ the minimal-norm normal-cone selection.

        ‖z‖ = |ξ|∞ + |η| + ‖ζ‖″.

        Raises:
            EmptyNormalConeError: If some λ_i is negative.
        """
        NlpService.check_dimensions(problem, point)
        if problem.m and np.min(point.lam) < -C.TOL_SIGN:
            i = int(np.argmin(point.lam))
            raise EmptyNormalConeError(
                f"Normal cone is empty: lambda[{i}] = {point.lam[i]:.3e} < 0"
            )
        obj = problem.objective.evaluate(point.x)
        f, Jf, _ = evaluate_stack(problem.inequalities, point.x, problem.n)
        g, Jg, _ = evaluate_stack(problem.equalities, point.x, problem.n)

        zeta = obj.gradient + point.lam @ Jf + point.y @ Jg
        xi = np.where(point.lam > 0, f, np.maximum(f, 0.0))
        norm = (
            float(np.max(np.abs(xi), initial=0.0))
            + float(np.linalg.norm(g))
            + dual_weak_norm(zeta, gram)
        )
        return KktResidualNlp(xi, g, zeta, norm)

    @staticmethod
    def check_mfcq(
        problem: NlpProblem, x: np.ndarray, config: Optional[SubregConfig] = None
    ) -> MfcqResult:
        """Surjective equality Jacobian plus positive independence of the active
        inequality gradients on its kernel.

        Positive independence fails iff some λ >= 0, Σλ = 1 annihilates the projected
        gradients (a linear program). The interior-direction form is computed as a
        cross-check and returned alongside.
        """
        config = NlpService.resolve_config(config)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        zero = NlpTuple.of(x, np.zeros(problem.m), np.zeros(problem.k))
        sets = NlpService.active_sets(problem, zero, config)
        _, Jf, _ = evaluate_stack(problem.inequalities, x, problem.n)
        _, Jg, _ = evaluate_stack(problem.equalities, x, problem.n)

        rank = NlpService.numerical_rank(Jg, config.tol_rank)
        if rank < problem.k:
            return MfcqResult(False, None, f"equality Jacobian has rank {rank} < {problem.k}")

        I = list(sets.active)
        N = NlpService.kernel(Jg, config.tol_rank, problem.n)
        projected = Jf[I] @ N if I else np.zeros((0, N.shape[1]))
        combination = NlpService.convex_zero_combination(projected)
        direction = NlpService.strictly_negative_direction(Jf[I], Jg) if I else np.zeros(problem.n)

        if combination is not None:
            witness = np.zeros(problem.m)
            witness[I] = combination
            if direction is not None:
                logger.warning(
                    "MFCQ cross-check disagrees: interior direction found despite witness"
                )
            return MfcqResult(False, witness, "active gradients positively dependent on ker g'")
        if direction is None:
            logger.warning("MFCQ cross-check disagrees: no interior direction found")
        return MfcqResult(True, None, "holds", direction)

    @staticmethod
    def check_strict_mfcq(
        problem: NlpProblem, point: NlpTuple, config: Optional[SubregConfig] = None
    ) -> StrictMfcqResult:
        """Only (λ_I, y) = 0 with λ_i >= 0 on I0 solves Σ_I λ_i f_i' + y g' = 0.

        The witness, when found, is the full (λ, y) vector with zeros off I.
        """
        config = NlpService.resolve_config(config)
        sets = NlpService.active_sets(problem, point, config)
        _, Jf, _ = evaluate_stack(problem.inequalities, point.x, problem.n)
        _, Jg, _ = evaluate_stack(problem.equalities, point.x, problem.n)

        I = list(sets.active)
        R = np.vstack([Jf[I], Jg]).T if (I or problem.k) else np.zeros((problem.n, 0))
        signed = [I.index(i) for i in sets.inactive_mult]
        c = NlpService.nonzero_signed_kernel_vector(R, signed, config.tol_rank)
        if c is None:
            return StrictMfcqResult(True, None, "the KKT multipliers at x̂ are unique", True)
        witness = np.zeros(problem.m + problem.k)
        witness[I] = c[: len(I)]
        witness[problem.m :] = c[len(I) :]
        return StrictMfcqResult(False, witness, "nontrivial multiplier direction exists", False)

    @staticmethod
    def critical_cone_nlp(
        problem: NlpProblem,
        point: NlpTuple,
        sets: Optional[ActiveSets] = None,
        config: Optional[SubregConfig] = None,
    ) -> PolyhedralCone:
        """K = {v : φ'(x̂)v <= 0, f_i'(x̂)v <= 0 (i ∈ I), g'(x̂)v = 0}."""
        if sets is None:
            sets = NlpService.active_sets(problem, point, config)
        obj = problem.objective.evaluate(point.x)
        _, Jf, _ = evaluate_stack(problem.inequalities, point.x, problem.n)
        _, Jg, _ = evaluate_stack(problem.equalities, point.x, problem.n)
        A = np.vstack([obj.gradient[None, :], Jf[list(sets.active)]])
        return PolyhedralCone.from_rows(problem.n, A, Jg)

    @staticmethod
    def quadratic_form_nlp(
        problem: NlpProblem, point: NlpTuple, gram: Optional[np.ndarray] = None
    ) -> QuadraticFormRep:
        """Ω = ∇²φ + Σ λ_i ∇²f_i + Σ y_j ∇²g_j at x̂, against the Gram of ‖·‖′."""
        NlpService.check_dimensions(problem, point)
        obj = problem.objective.evaluate(point.x)
        _, _, Hf = evaluate_stack(problem.inequalities, point.x, problem.n)
        _, _, Hg = evaluate_stack(problem.equalities, point.x, problem.n)
        matrix = (
            obj.hessian
            + np.einsum("i,ijk->jk", point.lam, Hf)
            + np.einsum("i,ijk->jk", point.y, Hg)
        )
        matrix = 0.5 * (matrix + matrix.T)
        gram = np.eye(problem.n) if gram is None else np.asarray(gram, dtype=float)
        return QuadraticFormRep(matrix, gram)

    @staticmethod
    def _retract(problem: NlpProblem, x: np.ndarray, max_iter: int = 50) -> Optional[np.ndarray]:
        """Gauss-Newton projection onto {g = 0}; None if it does not converge."""
        for _ in range(max_iter):
            g, Jg, _ = evaluate_stack(problem.equalities, x, problem.n)
            if np.max(np.abs(g)) <= 1e-12 * (1.0 + float(np.max(np.abs(x)))):
                return x
            step, *_ = np.linalg.lstsq(Jg, g, rcond=None)
            x = x - step
            if not np.all(np.isfinite(x)):
                return None
        return None

    @staticmethod
    def quadratic_growth_probe(
        problem: NlpProblem,
        point: NlpTuple,
        radius: Optional[float] = None,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
        gram: Optional[np.ndarray] = None,
        config: Optional[SubregConfig] = None,
    ) -> GrowthProbeResult:
        """Fit c in φ(x) - φ(x̂) >= c (‖x - x̂‖′)² over sampled feasible x near x̂.

        Raises:
            RetractionError: If more than half the retractions onto {g = 0} fail.
        """
        config = NlpService.resolve_config(config)
        radius = config.growth_radius if radius is None else radius
        samples = config.growth_samples if samples is None else samples
        seed = config.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        x_hat = point.x
        phi_hat = problem.objective.value(x_hat)
        n = problem.n

        ratios: list[float] = []
        gains: list[float] = []
        dists: list[float] = []
        rejected = failures = retractions = attempts = 0
        while len(ratios) < samples and attempts < 20 * samples:
            attempts += 1
            direction = rng.normal(size=n)
            direction /= np.linalg.norm(direction)
            x = x_hat + radius * rng.uniform() ** (1.0 / n) * direction
            if problem.k:
                retractions += 1
                retracted = NlpService._retract(problem, x)
                if retracted is None:
                    failures += 1
                    continue
                x = retracted
            if np.linalg.norm(x - x_hat) > radius:
                rejected += 1
                continue
            if problem.m:
                f, _, _ = evaluate_stack(problem.inequalities, x, n)
                if np.max(f) > 0.0:
                    rejected += 1
                    continue
            dist = weak_norm(x - x_hat, gram)
            if dist <= 1e-14:
                continue
            gain = problem.objective.value(x) - phi_hat
            ratios.append(gain / dist**2)
            gains.append(gain)
            dists.append(dist)

        if retractions and failures / retractions > C.MAX_RETRACTION_FAILURE:
            raise RetractionError(
                f"{failures}/{retractions} retractions onto the equality constraints failed; "
                "use a smaller radius"
            )
        if not ratios:
            return GrowthProbeResult(float("nan"), 0, rejected, failures, "no admissible samples")

        violations = tuple(r for r in ratios if r < 0.0)
        note = "negative growth" if violations else NlpService._growth_order_note(gains, dists)
        logger.debug(f"Growth probe: {len(ratios)} samples, min ratio {min(ratios):.4g}, {note}")
        return GrowthProbeResult(
            float(min(ratios)), len(ratios), rejected, failures, note, violations
        )

    @staticmethod
    def _growth_order_note(gains: list[float], dists: list[float]) -> str:
        g = np.asarray(gains)
        d = np.asarray(dists)
        keep = g > 0
        if keep.sum() < 3 or np.ptp(np.log(d[keep])) < 1e-6:
            return "quadratic"
        slope = np.polyfit(np.log(d[keep]), np.log(g[keep]), 1)[0]
        if slope < 1.5:
            return "superquadratic"
        return "higher-order" if slope > 2.5 else "quadratic"
