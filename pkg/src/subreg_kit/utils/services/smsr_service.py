"""
Service for empirical strong metric subregularity checks.

Perturbations of the optimality system are sampled block by block, the perturbed
system is solved near the reference tuple by the active-set Newton branch search,
and the ratios distance / perturbation size are collected over halving magnitudes.
A Lipschitz (subregular) system keeps the worst ratio flat as the magnitude shrinks;
Hölder behaviour makes it grow.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import (
    ControlTuple,
    KappaEstimate,
    KappaSample,
    MayerProblem,
    NlpProblem,
    NlpTuple,
    OcpProblem,
    Perturbation,
    Problem,
    PerturbationSpec,
    PerturbedSolution,
    SmsrReport,
    blocks_for,
    evaluate_stack,
    evaluate_stack_many,
)
from subreg_kit.utils.services.base_service import BaseService
from subreg_kit.utils.services.newton_service import NewtonResult, NewtonService
from subreg_kit.utils.services.nlp_service import NlpKktModel, NlpService, dual_weak_norm
from subreg_kit.utils.services.transcription_service import TranscribedModel
from subreg_kit.utils.services.transcription_service import TranscriptionService as T

logger = get_logger(__name__)

Reference = Union[NlpTuple, ControlTuple]

# Block norms: (composite norm, budget norm) per block name and problem kind.
_NORMS = {
    "nlp": {"xi": ("max", "max"), "eta": ("l2", "l2"), "zeta": ("dual", "dual")},
    "ocp": {
        "nu": ("abs", "abs"),
        "pi": ("time_l1", "time_l1"),
        "rho": ("time_l2", "time_linf"),
        "xi": ("time_l1", "time_l1"),
        "eta": ("time_l2", "time_linf"),
    },
    "mayer": {
        "pi": ("time_l1", "time_l1"),
        "rho": ("time_l2", "time_l2"),
        "nu": ("abs", "abs"),
        "eta": ("time_l1", "time_l1"),
        "mu": ("abs", "abs"),
        "xi": ("abs", "abs"),
    },
}


def _block_norm(kind: str, value: np.ndarray, spec: PerturbationSpec) -> float:
    if value.size == 0:
        return 0.0
    if kind == "max":
        return float(np.max(np.abs(value)))
    if kind in ("l2", "abs"):
        return float(np.linalg.norm(value))
    if kind == "dual":
        return dual_weak_norm(value, spec.gram)
    if kind == "time_l1":
        return T.time_l1(value, spec.h)
    if kind == "time_l2":
        return T.time_l2(value, spec.h)
    return T.time_linf(value)


class SmsrService(BaseService):
    """Perturbation sampling, perturbed solves, κ estimation and bound verification."""

    # region Perturbations

    @staticmethod
    def perturbation_spec(
        problem: Problem, reference: Reference, config: Optional[SubregConfig] = None
    ) -> PerturbationSpec:
        """Block shapes of the optimality system at `reference`, with config.blocks enabled."""
        config = SmsrService.resolve_config(config)
        if isinstance(problem, NlpProblem):
            shapes = {"xi": (problem.m,), "eta": (problem.k,), "zeta": (problem.n,)}
            h = 1.0
        else:
            assert isinstance(reference, ControlTuple)
            N, n, m = reference.mesh.n_intervals, problem.n, problem.m
            h = reference.mesh.h
            if isinstance(problem, OcpProblem):
                shapes = {
                    "nu": (2 * n,),
                    "pi": (N, n),
                    "rho": (N, m),
                    "xi": (N, n),
                    "eta": (N, problem.k),
                }
            else:
                shapes = {
                    "pi": (N, n),
                    "rho": (N, m),
                    "nu": (2 * n,),
                    "eta": (N, n),
                    "mu": (len(problem.endpoint_equalities),),
                    "xi": (len(problem.endpoint_inequalities),),
                }
        enabled = tuple(config.blocks) if config.blocks else blocks_for(problem.kind)
        return PerturbationSpec(problem.kind, shapes, h, None, enabled)

    @staticmethod
    def perturbation_norms(
        spec: PerturbationSpec, blocks: dict[str, np.ndarray]
    ) -> tuple[float, float, dict[str, float]]:
        """Composite norm, budget norm and per-block norms of a perturbation."""
        norms = _NORMS[spec.kind]
        per_block = {name: _block_norm(norms[name][0], blocks[name], spec) for name in blocks}
        budget = sum(_block_norm(norms[name][1], blocks[name], spec) for name in blocks)
        return float(sum(per_block.values())), float(budget), per_block

    @staticmethod
    def sample_perturbation(
        spec: PerturbationSpec, magnitude: float, seed: int, index: int = 0
    ) -> Perturbation:
        """Random perturbation with composite norm exactly `magnitude`.

        Each enabled block is drawn uniformly from the unit ball of its own norm and
        the whole vector is rescaled. The direction depends on (seed, index) only, so
        the same index gives the same direction at every magnitude.

        Raises:
            ProblemInputError: If magnitude is negative.
        """
        if magnitude < 0:
            raise ProblemInputError(f"Perturbation magnitude must be non-negative, got {magnitude}")
        rng = np.random.default_rng([seed, index])
        norms = _NORMS[spec.kind]
        blocks: dict[str, np.ndarray] = {}
        for name, shape in spec.shapes.items():
            value = np.zeros(shape)
            if name in spec.enabled and value.size:
                direction = rng.normal(size=shape)
                size = _block_norm(norms[name][0], direction, spec)
                if size > 0:
                    value = direction / size * rng.uniform() ** (1.0 / value.size)
            blocks[name] = value

        total, _, _ = SmsrService.perturbation_norms(spec, blocks)
        scale = magnitude / total if total > 0 else 0.0
        blocks = {name: scale * value for name, value in blocks.items()}
        norm, budget, _ = SmsrService.perturbation_norms(spec, blocks)
        return Perturbation(spec.kind, blocks, norm, budget)

    # endregion

    # region Perturbed solves

    @staticmethod
    def default_radius(reference: Reference) -> float:
        if isinstance(reference, NlpTuple):
            scale = float(np.max(np.abs(reference.x), initial=0.0))
        else:
            scale = max(
                float(np.max(np.abs(reference.x), initial=0.0)),
                float(np.max(np.abs(reference.u), initial=0.0)),
            )
        return C.RADIUS_SCALE * (1.0 + scale)

    @staticmethod
    def solve_perturbed_kkt(
        problem: NlpProblem,
        perturbation: Perturbation,
        reference: NlpTuple,
        radius_a: float,
        config: Optional[SubregConfig] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> list[PerturbedSolution]:
        """Every converged branch s with z ∈ F(s) and |x - x̂| <= radius_a.

        Distances are ‖Δx‖′ + |Δλ| + ‖Δy‖ (full tuple) and ‖Δx‖ for the primal.
        An empty list means no solution was found near the reference.
        """
        config = SmsrService.resolve_config(config)
        NlpService.check_dimensions(problem, reference)
        model = NlpKktModel(problem, perturbation)
        start = NlpService.reference_point(reference)
        f, _, _ = evaluate_stack(problem.inequalities, reference.x, problem.n)
        t_act = NlpService.activity_tolerance(f, config)
        active = frozenset(i for i in range(problem.m) if f[i] >= -t_act)
        margins = np.array(
            [abs(reference.lam[i]) if i in active else abs(f[i]) for i in range(problem.m)]
        )

        def accept(result: NewtonResult) -> Optional[PerturbedSolution]:
            point = result.point
            dx = point.z - reference.x
            primal = float(np.linalg.norm(dx))
            if primal > radius_a:
                return None
            d_lam = float(np.linalg.norm(point.ineq_mult - reference.lam))
            d_y = float(np.linalg.norm(point.eq_mult - reference.y))
            return PerturbedSolution(
                point.z,
                {"lam": point.ineq_mult, "y": point.eq_mult},
                result.active,
                primal + d_lam + d_y,
                primal,
                primal,
                result.iterations,
                {"x": primal, "lam": d_lam, "y": d_y},
            )

        return NewtonService.branch_search(
            model, start, active, margins, config, accept, radius_a, rng
        )

    @staticmethod
    def solve_perturbed_ocp(
        problem: Union[OcpProblem, MayerProblem],
        perturbation: Perturbation,
        reference: ControlTuple,
        radius_a: float,
        config: Optional[SubregConfig] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> list[PerturbedSolution]:
        """Every converged branch of the perturbed discrete optimality system.

        The branch must satisfy ‖Δx‖_{1,1} + ‖Δu‖_∞ <= radius_a. Its full-tuple
        distance is ‖Δx‖_{1,1} + ‖Δu‖_2 + ‖Δp‖_{1,1} + ‖Δλ‖_2 for an OCP and
        ‖Δx‖_{1,1} + ‖Δu‖_2 + ‖Δp‖_{1,1} + |Δα| + |Δβ| for a Mayer problem.
        """
        config = SmsrService.resolve_config(config)
        mesh = reference.mesh
        h = mesh.h
        model = TranscribedModel(problem, mesh, perturbation)
        start = TranscribedModel.kkt_point(problem, reference)

        if isinstance(problem, OcpProblem):
            k = problem.k
            if k:
                Gv, _, _ = evaluate_stack_many(problem.control_constraints, reference.u, problem.m)
            else:
                Gv = np.zeros((mesh.n_intervals, 0))
            values = Gv.reshape(-1)
            multipliers = reference.lam.reshape(-1)
        else:
            values, _, _ = evaluate_stack(
                problem.endpoint_inequalities, reference.trajectory.q, 2 * problem.n
            )
            endpoint = reference.endpoint
            multipliers = (
                np.asarray(endpoint.alpha, dtype=float) if endpoint else np.zeros(values.size)
            )
        t_act = config.tol_act * (1.0 + float(np.max(np.abs(values), initial=0.0)))
        active = frozenset(int(i) for i in np.flatnonzero(values >= -t_act))
        margins = np.where(values >= -t_act, np.abs(multipliers), np.abs(values))

        def accept(result: NewtonResult) -> Optional[PerturbedSolution]:
            solved = model.control_tuple(result.point)
            dx, du = solved.x - reference.x, solved.u - reference.u
            strong = T.strong_norm(dx, du)
            if strong > radius_a:
                return None
            distances = {
                "x": T.w11_norm(dx),
                "u": T.time_l2(du, h),
                "p": T.w11_norm(solved.p - reference.p),
            }
            if isinstance(problem, OcpProblem):
                distances["lam"] = T.time_l2(solved.lam - reference.lam, h)
                named = {"p": solved.p, "lam": solved.lam}
            else:
                assert solved.endpoint is not None and reference.endpoint is not None
                distances["alpha"] = float(
                    np.linalg.norm(solved.endpoint.alpha - reference.endpoint.alpha)
                )
                distances["beta"] = float(
                    np.linalg.norm(solved.endpoint.beta - reference.endpoint.beta)
                )
                named = {
                    "p": solved.p,
                    "alpha": solved.endpoint.alpha,
                    "beta": solved.endpoint.beta,
                }
            return PerturbedSolution(
                result.point.z,
                named,
                result.active,
                float(sum(distances.values())),
                strong,
                T.weak_norm(dx, du, h),
                result.iterations,
                distances,
            )

        return NewtonService.branch_search(
            model, start, active, margins, config, accept, radius_a, rng
        )

    # endregion

    # region Kappa estimation

    @staticmethod
    def _solve_sample(
        problem: Problem,
        reference: Reference,
        spec: PerturbationSpec,
        level: int,
        index: int,
        magnitude: float,
        radius_a: float,
        config: SubregConfig,
    ) -> KappaSample:
        perturbation = SmsrService.sample_perturbation(spec, magnitude, config.seed, index)
        rng = np.random.default_rng([config.seed, level, index, 1])
        if isinstance(problem, NlpProblem):
            assert isinstance(reference, NlpTuple)
            branches = SmsrService.solve_perturbed_kkt(
                problem, perturbation, reference, radius_a, config, rng
            )
        else:
            assert isinstance(reference, ControlTuple)
            branches = SmsrService.solve_perturbed_ocp(
                problem, perturbation, reference, radius_a, config, rng
            )
        _, _, block_norms = SmsrService.perturbation_norms(spec, perturbation.blocks)

        if not branches:
            nan = float("nan")
            return KappaSample(
                level,
                index,
                magnitude,
                perturbation.norm,
                perturbation.budget_norm,
                False,
                nan,
                nan,
                nan,
                nan,
                0,
                block_norms,
            )

        def ratio_of(solution: PerturbedSolution) -> float:
            if perturbation.norm > 0:
                return solution.dist_weak / perturbation.norm
            return 0.0 if solution.dist_weak == 0.0 else float("inf")

        worst = max(branches, key=ratio_of)
        return KappaSample(
            level,
            index,
            magnitude,
            perturbation.norm,
            perturbation.budget_norm,
            True,
            ratio_of(worst),
            worst.dist_weak,
            worst.dist_strong_primal,
            worst.dist_weak_primal,
            len(branches),
            block_norms,
            dict(worst.distances),
            ";".join(str(i) for i in sorted(worst.active)),
        )

    @staticmethod
    def estimate_kappa(
        problem: Problem,
        reference: Reference,
        config: Optional[SubregConfig] = None,
        radius_a: Optional[float] = None,
        spec: Optional[PerturbationSpec] = None,
    ) -> KappaEstimate:
        """Worst distance / perturbation ratio over halving magnitudes.

        plateau_flag holds when the worst ratio at the smallest magnitude is at most
        PLATEAU_SPREAD times the worst ratio at the largest one. Fewer than half of the
        solves converging makes the estimate inconclusive.
        """
        config = SmsrService.resolve_config(config)
        radius_a = radius_a or config.radius_a or SmsrService.default_radius(reference)
        spec = spec or SmsrService.perturbation_spec(problem, reference, config)
        magnitudes = sorted(config.magnitudes, reverse=True)
        jobs = [
            (level, index, magnitude)
            for level, magnitude in enumerate(magnitudes)
            for index in range(config.samples_per_magnitude)
        ]
        logger.info(
            f"Estimating kappa for '{problem.name}': {len(jobs)} solves, radius {radius_a:.4g}"
        )

        def run(job: tuple[int, int, float]) -> KappaSample:
            level, index, magnitude = job
            return SmsrService._solve_sample(
                problem, reference, spec, level, index, magnitude, radius_a, config
            )

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            samples = sorted(pool.map(run, jobs), key=lambda s: (s.level, s.index))

        converged = [s for s in samples if s.converged]
        fraction = len(converged) / len(samples) if samples else 0.0
        level_max = tuple(
            max((s.ratio for s in converged if s.level == level), default=float("nan"))
            for level in range(len(magnitudes))
        )
        kappa_hat = max((s.ratio for s in converged), default=float("nan"))
        finite = [r for r in level_max if np.isfinite(r)]
        plateau = bool(finite) and finite[-1] <= C.PLATEAU_SPREAD * finite[0]
        status = "ok" if fraction >= C.MIN_CONVERGED_FRACTION else "inconclusive"
        if status != "ok":
            logger.warning(
                f"Only {len(converged)}/{len(samples)} perturbed solves converged; "
                "the estimate is inconclusive"
            )
        bound_b = max((s.norm for s in samples), default=0.0)
        return KappaEstimate(
            tuple(samples), kappa_hat, plateau, radius_a, level_max, fraction, status, bound_b
        )

    # endregion

    # region Reports

    @staticmethod
    def verify_bound(
        estimate: Union[KappaEstimate, SmsrReport], kappa: float
    ) -> tuple[KappaSample, ...]:
        """Converged samples whose distance exceeds kappa times the perturbation size."""
        if isinstance(estimate, SmsrReport):
            estimate = estimate.estimate
        return tuple(s for s in estimate.samples if s.converged and s.ratio > kappa)

    @staticmethod
    def distance_breakdown(estimate: KappaEstimate) -> dict[str, float]:
        """Worst ratio of each per-variable distance to the perturbation size."""
        breakdown: dict[str, float] = {}
        for sample in estimate.samples:
            if not sample.converged or sample.norm <= 0:
                continue
            for name, value in sample.distances.items():
                breakdown[name] = max(breakdown.get(name, 0.0), value / sample.norm)
        return dict(sorted(breakdown.items()))

    @staticmethod
    def smsr_report(
        problem_id: str,
        problem: Problem,
        estimate: KappaEstimate,
        certificates: Optional[dict[str, bool]] = None,
    ) -> SmsrReport:
        violations = SmsrService.verify_bound(estimate, estimate.kappa_hat)
        return SmsrReport(
            problem_id,
            problem.kind,
            dict(certificates or {}),
            estimate,
            violations,
            SmsrService.distance_breakdown(estimate),
        )

    # endregion
