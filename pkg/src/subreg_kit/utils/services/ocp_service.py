"""
Service for discretized analysis of control-constrained optimal control problems.

Works on the Euler transcription: states on N+1 nodes, controls and multipliers on
N intervals, stationarity p_{i+1} f_u(x_i, u_i) + λ_i G'(u_i) = 0 imposed at left
nodes. Critical cones and quadratic forms live on z = (x0, u) with the linearized
dynamics eliminated through the discrete sensitivities.
"""

import dataclasses
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import (
    EmptyNormalConeError,
    PreconditionError,
    ProblemInputError,
    RegularityError,
    RetractionError,
)
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import (
    AdjointPath,
    CoercivityCertificate,
    ControlComponentReport,
    ControlTuple,
    DiscreteTrajectory,
    GrowthProbeResult,
    HamiltonianGrowthResult,
    LegendreResult,
    MayerProblem,
    Mesh,
    MultiplierPath,
    OcpProblem,
    OcpResidual,
    PolyhedralCone,
    QuadraticFormRep,
    RegularityResult,
    TimeSets,
    evaluate_stack,
    evaluate_stack_many,
)
from subreg_kit.utils.services.base_service import BaseService
from subreg_kit.utils.services.cone_service import ConeService, _cone_point_in_span
from subreg_kit.utils.services.transcription_service import (
    ControlProblem,
    TranscribedModel,
    TranscriptionService as T,
)

logger = get_logger(__name__)


class OcpService(BaseService):
    """State, adjoint and multiplier recursions plus second-order checks for OcpProblem."""

    # region Recursions

    @staticmethod
    def propagate_state(
        problem: ControlProblem, x0: np.ndarray, u: np.ndarray, mesh: Mesh
    ) -> np.ndarray:
        """Explicit Euler states x_{i+1} = x_i + h f(x_i, u_i), shape (N+1, n)."""
        u = np.asarray(u, dtype=float)
        if u.shape != (mesh.n_intervals, problem.m):
            raise ProblemInputError(
                f"Controls have shape {u.shape}, expected ({mesh.n_intervals}, {problem.m})"
            )
        return T.propagate(problem, x0, u, mesh)

    @staticmethod
    def solve_adjoint(
        problem: ControlProblem,
        x: np.ndarray,
        u: np.ndarray,
        mesh: Mesh,
        endpoint_gradient: np.ndarray,
    ) -> AdjointPath:
        """Discrete adjoint from p_N = l_{x1}; reports |p_0 + l_{x0}| as the defect at 0."""
        n = problem.n
        endpoint_gradient = np.asarray(endpoint_gradient, dtype=float).reshape(2 * n)
        nodes = T.node_data(problem, x, u, hessian=False)
        p = T.adjoint(nodes.jac, mesh.h, endpoint_gradient[n:])
        defect = float(np.linalg.norm(p[0] + endpoint_gradient[:n]))
        return AdjointPath(p, defect)

    @staticmethod
    def multiplier_from_stationarity(
        problem: OcpProblem,
        x: np.ndarray,
        u: np.ndarray,
        p: np.ndarray,
        mesh: Mesh,
        config: Optional[SubregConfig] = None,
    ) -> MultiplierPath:
        """Least-squares λ on the active rows of p_{i+1} f_u + λ_i G'(u_i) = 0.

        Raises:
            RegularityError: If the active gradients at some node are dependent.
        """
        config = OcpService.resolve_config(config)
        N, n, k = mesh.n_intervals, problem.n, problem.k
        nodes = T.node_data(problem, x, u, hessian=False)
        H_u = np.einsum("ia,iab->ib", p[1:], nodes.jac[:, :, n:])
        lam = np.zeros((N, k))
        if k:
            Gv, GJ, _ = evaluate_stack_many(problem.control_constraints, u, problem.m)
            t_act = config.tol_act * (1.0 + float(np.max(np.abs(Gv))))
            for i in range(N):
                act = [j for j in range(k) if Gv[i, j] >= -t_act]
                if not act:
                    continue
                Ga = GJ[i, act]
                if OcpService.numerical_rank(Ga, config.tol_rank) < len(act):
                    raise RegularityError("Active control-constraint gradients are dependent", i)
                lam[i, act] = np.linalg.lstsq(Ga.T, -H_u[i], rcond=None)[0]
            residual = H_u + np.einsum("ij,ijb->ib", lam, GJ)
        else:
            residual = H_u
        return MultiplierPath(
            lam,
            float(np.max(np.abs(residual), initial=0.0)),
            float(np.min(lam, initial=np.inf)) if k else float("inf"),
        )

    @staticmethod
    def complete_tuple(
        problem: OcpProblem,
        x0: np.ndarray,
        u: np.ndarray,
        mesh: Mesh,
        config: Optional[SubregConfig] = None,
    ) -> ControlTuple:
        """Stationary tuple from (x0, u): states, adjoint and multipliers."""
        u = np.asarray(u, dtype=float)
        x = OcpService.propagate_state(problem, x0, u, mesh)
        q = np.concatenate([x[0], x[-1]])
        gradient = problem.cost.evaluate(q).gradient
        adjoint = OcpService.solve_adjoint(problem, x, u, mesh, gradient)
        lam = OcpService.multiplier_from_stationarity(problem, x, u, adjoint.p, mesh, config).lam
        return ControlTuple(DiscreteTrajectory(mesh, x, u), adjoint.p, lam)

    # endregion

    # region Residuals and time sets

    @staticmethod
    def optimality_residuals_ocp(
        problem: OcpProblem, point: ControlTuple, config: Optional[SubregConfig] = None
    ) -> OcpResidual:
        """ω = (ν, π, ρ, ξ, η) of the discrete optimality system at `point`.

        ‖ω‖ = |ν| + ‖π‖₁ + ‖ρ‖₂ + ‖ξ‖₁ + ‖η‖₂; the budget norm swaps ‖ρ‖₂, ‖η‖₂
        for their sup norms.

        Raises:
            EmptyNormalConeError: If some λ_ij is negative.
        """
        config = OcpService.resolve_config(config)
        mesh, n, h = point.mesh, problem.n, point.mesh.h
        x, u, p, lam = point.x, point.u, point.p, point.lam
        if lam.size and np.min(lam) < -C.TOL_SIGN:
            i, j = np.unravel_index(int(np.argmin(lam)), lam.shape)
            raise EmptyNormalConeError(f"Normal cone is empty: lambda[{i}, {j}] = {lam[i, j]:.3e}")

        nodes = T.node_data(problem, x, u, hessian=False)
        q = np.concatenate([x[0], x[-1]])
        grad = problem.cost.evaluate(q).gradient
        nu = np.concatenate([grad[:n] + p[0], grad[n:] - p[-1]])
        pi = np.diff(p, axis=0) / h + np.einsum("ia,iab->ib", p[1:], nodes.jac[:, :, :n])
        rho = np.einsum("ia,iab->ib", p[1:], nodes.jac[:, :, n:])
        eta = np.zeros((mesh.n_intervals, problem.k))
        if problem.k:
            Gv, GJ, _ = evaluate_stack_many(problem.control_constraints, u, problem.m)
            rho = rho + np.einsum("ij,ijb->ib", lam, GJ)
            eta = np.where(lam > config.tol_mul, Gv, np.maximum(Gv, 0.0))
        xi = nodes.f - np.diff(x, axis=0) / h

        head = float(np.linalg.norm(nu)) + T.time_l1(pi, h)
        tail = T.time_l1(xi, h)
        norm = head + T.time_l2(rho, h) + tail + T.time_l2(eta, h)
        budget = head + T.time_linf(rho) + tail + T.time_linf(eta)
        return OcpResidual(nu, pi, rho, xi, eta, norm, budget)

    @staticmethod
    def time_sets(
        problem: OcpProblem,
        u: np.ndarray,
        lam: np.ndarray,
        mesh: Mesh,
        delta: float,
        config: Optional[SubregConfig] = None,
    ) -> TimeSets:
        """Active nodes M_j, M⁺_j, M⁺_δ,j and the low-multiplier nodes m_δ.

        Raises:
            PreconditionError: If a positive multiplier sits on an inactive constraint.
        """
        config = OcpService.resolve_config(config)
        k = problem.k
        if k == 0:
            return TimeSets(delta, mesh.h, (), (), (), ())
        Gv, _, _ = evaluate_stack_many(problem.control_constraints, u, problem.m)
        t_act = config.tol_act * (1.0 + float(np.max(np.abs(Gv))))
        is_active = np.abs(Gv) <= t_act
        positive = lam > config.tol_mul
        bad = positive & (Gv < -t_act)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise PreconditionError(
                f"Complementarity violated at node {i}, constraint {j}: "
                f"lambda = {lam[i, j]:.3e}, G = {Gv[i, j]:.3e}"
            )
        low = positive & (lam <= delta) & is_active

        def per_j(mask: np.ndarray) -> tuple[tuple[int, ...], ...]:
            return tuple(tuple(int(i) for i in np.flatnonzero(mask[:, j])) for j in range(k))

        return TimeSets(
            delta,
            mesh.h,
            per_j(is_active),
            per_j(is_active & positive),
            per_j(is_active & (lam > delta)),
            tuple(int(i) for i in np.flatnonzero(low.any(axis=1))),
        )

    # endregion

    # region Critical cones and quadratic forms

    @staticmethod
    def discrete_critical_cone_ocp(
        problem: OcpProblem,
        point: ControlTuple,
        delta: Optional[float] = None,
        representation: str = "multiplier",
        config: Optional[SubregConfig] = None,
    ) -> PolyhedralCone:
        """Discrete K (delta None) or K_δ on z = (x0, u).

        Rows per node i and active j: G_j'(û_i) u_i <= 0, and = 0 where λ_ij > 0
        (K) or λ_ij > δ (K_δ). The "hamiltonian" representation of K replaces the
        equality rows by one row H_u(i) u_i = 0 per node.
        """
        config = OcpService.resolve_config(config)
        if representation not in ("multiplier", "hamiltonian"):
            raise ValueError(f"Unknown cone representation '{representation}'")
        if representation == "hamiltonian" and delta is not None:
            raise ValueError("The hamiltonian representation describes the exact cone only")

        mesh, n, m, k = point.mesh, problem.n, problem.m, problem.k
        N = mesh.n_intervals
        dim = n + N * m
        if k == 0:
            return PolyhedralCone.from_rows(dim)
        delta_eff = np.inf if delta is None else delta
        sets = OcpService.time_sets(problem, point.u, point.lam, mesh, delta_eff, config)
        equality_nodes = sets.positive if delta is None else sets.positive_delta
        _, GJ, _ = evaluate_stack_many(problem.control_constraints, point.u, m)

        ineq_rows, eq_rows = [], []
        for j in range(k):
            eq_set = set(equality_nodes[j])
            for i in sets.active[j]:
                row = np.zeros(dim)
                row[T.control_columns(n, m, i)] = GJ[i, j]
                if representation == "multiplier" and i in eq_set:
                    eq_rows.append(row)
                else:
                    ineq_rows.append(row)

        if representation == "hamiltonian":
            nodes = T.node_data(problem, point.x, point.u, hessian=False)
            H_u = np.einsum("ia,iab->ib", point.p[1:], nodes.jac[:, :, n:])
            scale = max(1.0, float(np.max(np.abs(H_u), initial=0.0)))
            for i in range(N):
                if np.max(np.abs(H_u[i])) > config.tol_mul * scale:
                    row = np.zeros(dim)
                    row[T.control_columns(n, m, i)] = H_u[i]
                    eq_rows.append(row)

        return PolyhedralCone.from_rows(dim, ineq_rows, eq_rows)

    @staticmethod
    def quadratic_form_ocp(problem: ControlProblem, point: ControlTuple) -> QuadraticFormRep:
        """Reduced Ω(w) = ⟨l''q, q⟩ + Σ h ⟨H̄_ww w_i, w_i⟩ on z, Gram diag(I_n, h I)."""
        model = TranscribedModel(problem, point.mesh)
        kkt = TranscribedModel.kkt_point(problem, point)
        evaluation = model.evaluate(kkt.z, kkt.ineq_mult, kkt.eq_mult, hessian=True)
        return QuadraticFormRep(evaluation.hessian, T.weak_gram(problem.n, problem.m, point.mesh))

    @staticmethod
    def linearized_states(problem: ControlProblem, point: ControlTuple) -> np.ndarray:
        """Sensitivities S (N+1, n, dim) of the states along the reference."""
        nodes = T.node_data(problem, point.x, point.u, hessian=False)
        return T.sensitivities(nodes.jac, point.mesh.h, problem.n, problem.m)

    @staticmethod
    def sup_norm_ratio(
        form: QuadraticFormRep, S: np.ndarray, v: np.ndarray, problem: ControlProblem, mesh: Mesh
    ) -> float:
        """Ω(v) / (‖x_v‖_∞² + ‖u_v‖_2²) for the linearized states x_v = S v."""
        x_v = np.einsum("iad,d->ia", S, v)
        _, u_v = T.split(v, problem.n, problem.m)
        denom = T.time_linf(x_v) ** 2 + T.time_l2(u_v, mesh.h) ** 2
        return form.value(v) / denom if denom > 0 else float("nan")

    @staticmethod
    def certify_coercivity_ocp(
        problem: OcpProblem,
        point: ControlTuple,
        delta: Optional[float] = None,
        config: Optional[SubregConfig] = None,
    ) -> CoercivityCertificate:
        """Coercivity of Ω on K_δ (or K) against |x(0)|² + ‖u‖_2²."""
        config = OcpService.resolve_config(config)
        cone = OcpService.discrete_critical_cone_ocp(problem, point, delta, config=config)
        form = OcpService.quadratic_form_ocp(problem, point)
        certificate = ConeService.certify_coercivity(form, cone, config)
        ratio = None
        if certificate.minimizer is not None:
            S = OcpService.linearized_states(problem, point)
            ratio = OcpService.sup_norm_ratio(form, S, certificate.minimizer, problem, point.mesh)
        label = "K" if delta is None else f"K_delta(delta={delta!r})"
        logger.info(
            f"Coercivity on {label}: certified={certificate.certified} "
            f"c={certificate.c0:.6g} ({certificate.method})"
        )
        return dataclasses.replace(certificate, delta=delta, sup_norm_ratio=ratio)

    # endregion

    # region Pointwise conditions

    @staticmethod
    def _augmented_control_hessians(problem: OcpProblem, point: ControlTuple) -> np.ndarray:
        """H̄_uu at every node, shape (N, m, m)."""
        n = problem.n
        nodes = T.node_data(problem, point.x, point.u, hessian=True)
        H = np.einsum("ia,iabc->ibc", point.p[1:], nodes.hess[:, :, n:, n:])
        if problem.k:
            _, _, GH = evaluate_stack_many(problem.control_constraints, point.u, problem.m)
            H = H + np.einsum("ij,ijab->iab", point.lam, GH)
        return H

    @staticmethod
    def check_legendre(
        problem: OcpProblem,
        point: ControlTuple,
        delta: float,
        config: Optional[SubregConfig] = None,
    ) -> LegendreResult:
        """Strengthened Legendre condition: H̄_uu coercive on C_δ(t_i) for every i in m_δ."""
        config = OcpService.resolve_config(config)
        sets = OcpService.time_sets(problem, point.u, point.lam, point.mesh, delta, config)
        if not sets.low:
            return LegendreResult(True, float("inf"))
        m = problem.m
        H = OcpService._augmented_control_hessians(problem, point)
        _, GJ, _ = evaluate_stack_many(problem.control_constraints, point.u, m)
        active = [set(a) for a in sets.active]
        strong = [set(a) for a in sets.positive_delta]

        c_l = float("inf")
        worst_node, worst_direction = None, None
        for i in sets.low:
            ineq = [GJ[i, j] for j in range(problem.k) if i in active[j]]
            eq = [GJ[i, j] for j in range(problem.k) if i in strong[j]]
            cone = PolyhedralCone.from_rows(m, ineq, eq)
            form = QuadraticFormRep(H[i], np.eye(m))
            certificate = ConeService.certify_coercivity(form, cone, config)
            if certificate.c0 < c_l:
                c_l = certificate.c0
                worst_node, worst_direction = i, certificate.minimizer
        holds = c_l > config.tol_pd
        if not holds:
            logger.info(f"Legendre condition fails at node {worst_node} (c = {c_l:.4g})")
        return LegendreResult(
            holds, c_l, None if holds else worst_node, None if holds else worst_direction
        )

    @staticmethod
    def check_hamiltonian_growth(
        problem: OcpProblem,
        point: ControlTuple,
        delta: float,
        eps: float = C.HAMILTONIAN_EPS,
        samples: int = C.HAMILTONIAN_SAMPLES,
        seed: Optional[int] = None,
        config: Optional[SubregConfig] = None,
    ) -> HamiltonianGrowthResult:
        """Sampled H(x̂_i, u, p̂_{i+1}) - H(x̂_i, û_i, p̂_{i+1}) >= c_H |u - û_i|² on m_δ.

        Controls are drawn from U ∩ B(û_i, ε) by rejection; a node with no accepted
        sample makes the result inconclusive.
        """
        config = OcpService.resolve_config(config)
        seed = config.seed if seed is None else seed
        sets = OcpService.time_sets(problem, point.u, point.lam, point.mesh, delta, config)
        if not sets.low:
            return HamiltonianGrowthResult(True, float("inf"), eps)
        rng = np.random.default_rng(seed)
        n, m = problem.n, problem.m

        c_h = float("inf")
        worst_node, worst_control = None, None
        for i in sets.low:
            u_hat = point.u[i]
            accepted = np.zeros((0, m))
            for _ in range(20):
                directions = rng.normal(size=(samples, m))
                directions /= np.linalg.norm(directions, axis=1, keepdims=True)
                radii = eps * rng.uniform(size=(samples, 1)) ** (1.0 / m)
                candidates = u_hat + radii * directions
                G = np.column_stack(
                    [g.values_many(candidates) for g in problem.control_constraints]
                )
                accepted = np.vstack([accepted, candidates[np.max(G, axis=1) <= 0.0]])
                if accepted.shape[0] >= samples:
                    break
            if accepted.shape[0] == 0:
                logger.warning(f"No admissible controls sampled near node {i}")
                return HamiltonianGrowthResult(False, float("nan"), eps, i, None, "inconclusive")
            accepted = accepted[:samples]

            x_i = np.broadcast_to(point.x[i], (accepted.shape[0], n))
            w = np.hstack([x_i, accepted])
            f_u = np.column_stack([f.values_many(w) for f in problem.dynamics])
            w_hat = np.concatenate([point.x[i], u_hat])
            f_hat = np.array([f.value(w_hat) for f in problem.dynamics])
            gains = (f_u - f_hat) @ point.p[i + 1]
            ratios = gains / np.sum((accepted - u_hat) ** 2, axis=1)
            j = int(np.argmin(ratios))
            if ratios[j] < c_h:
                c_h, worst_node, worst_control = float(ratios[j]), i, accepted[j]

        holds = c_h > 0.0
        return HamiltonianGrowthResult(
            holds, c_h, eps, None if holds else worst_node, None if holds else worst_control
        )

    @staticmethod
    def check_control_regularity(
        problem: OcpProblem, u: np.ndarray, mesh: Mesh, config: Optional[SubregConfig] = None
    ) -> RegularityResult:
        """Linear independence of the active G_j'(u_i) at every node."""
        config = OcpService.resolve_config(config)
        if problem.k == 0:
            return RegularityResult(True, None, float("inf"))
        Gv, GJ, _ = evaluate_stack_many(problem.control_constraints, u, problem.m)
        t_act = config.tol_act * (1.0 + float(np.max(np.abs(Gv))))
        worst_node, worst_sigma, holds = None, float("inf"), True
        for i in range(mesh.n_intervals):
            act = [j for j in range(problem.k) if Gv[i, j] >= -t_act]
            if not act:
                continue
            s = np.linalg.svd(GJ[i, act], compute_uv=False)
            sigma = float(s[-1]) if len(s) == len(act) else 0.0
            if sigma < worst_sigma:
                worst_node, worst_sigma = i, sigma
            if OcpService.numerical_rank(GJ[i, act], config.tol_rank) < len(act):
                holds = False
        return RegularityResult(holds, worst_node, worst_sigma)

    # endregion

    # region Cone diagnostics

    @staticmethod
    def control_component_report(
        cone: PolyhedralCone, n: int, m: int, mesh: Mesh, config: Optional[SubregConfig] = None
    ) -> ControlComponentReport:
        """Nodes whose control directions the cone forces to zero.

        The control component counts as trivial when the free nodes have measure at
        most one interval.
        """
        config = OcpService.resolve_config(config)
        N = mesh.n_intervals
        rows = np.vstack([cone.A, cone.B])
        is_eq = np.concatenate([np.zeros(cone.A.shape[0], bool), np.ones(cone.B.shape[0], bool)])
        support = np.abs(rows) > 0
        node_local = not support[:, :n].any() and all(
            support[r, n:].reshape(N, m).any(axis=1).sum() <= 1 for r in range(rows.shape[0])
        )

        pinned, free = [], []
        for i in range(N):
            cols = T.control_columns(n, m, i)
            if node_local:
                mine = support[:, cols].any(axis=1)
                local = PolyhedralCone.from_rows(
                    m, rows[mine & ~is_eq][:, cols], rows[mine & is_eq][:, cols]
                )
                is_free = OcpService._has_nonzero_member(local, config)
            else:
                is_free = OcpService._coordinate_moves(cone, list(range(cols.start, cols.stop)))
            (free if is_free else pinned).append(i)

        measure = mesh.h * len(free)
        return ControlComponentReport(
            tuple(pinned), tuple(free), measure, measure <= mesh.h * (1.0 + 1e-9)
        )

    @staticmethod
    def _has_nonzero_member(cone: PolyhedralCone, config: SubregConfig) -> bool:
        Z = OcpService.kernel(cone.B, config.tol_rank, cone.dim)
        if Z.shape[1] == 0:
            return False
        return _cone_point_in_span(cone.A, Z) is not None

    @staticmethod
    def _coordinate_moves(cone: PolyhedralCone, columns: list[int]) -> bool:
        """Whether some cone member in the unit box moves one of `columns`."""
        for col in columns:
            for s in (1.0, -1.0):
                c = np.zeros(cone.dim)
                c[col] = -s
                result = linprog(
                    c,
                    A_ub=cone.A if cone.A.shape[0] else None,
                    b_ub=np.zeros(cone.A.shape[0]) if cone.A.shape[0] else None,
                    A_eq=cone.B if cone.B.shape[0] else None,
                    b_eq=np.zeros(cone.B.shape[0]) if cone.B.shape[0] else None,
                    bounds=[(-1.0, 1.0)] * cone.dim,
                    method="highs",
                )
                if result.success and -result.fun > 1e-9:
                    return True
        return False

    @staticmethod
    def endpoint_derivative_on_cone(
        problem: ControlProblem,
        point: ControlTuple,
        cone: PolyhedralCone,
        samples: int = 64,
        seed: Optional[int] = None,
        config: Optional[SubregConfig] = None,
    ) -> float:
        """max |F'(q̂) q_v| over sampled unit members v of the cone (zero on K)."""
        config = OcpService.resolve_config(config)
        seed = config.seed if seed is None else seed
        S = OcpService.linearized_states(problem, point)
        Sq = T.endpoint_map(S)
        q = np.concatenate([point.x[0], point.x[-1]])
        direction = problem.cost.evaluate(q).gradient @ Sq
        gram = T.weak_gram(problem.n, problem.m, point.mesh)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            v = cone.project(rng.normal(size=cone.dim))
            size = float(np.sqrt(v @ gram @ v))
            if size > 1e-12:
                worst = max(worst, abs(float(direction @ v)) / size)
        return worst

    # endregion

    # region Growth probe

    @staticmethod
    def _shrink_into_control_set(
        problem: OcpProblem, u_hat: np.ndarray, u: np.ndarray
    ) -> np.ndarray:
        """Per node, the largest t in [0, 1] with û + t (u - û) ∈ U (bisection)."""
        if problem.k == 0:
            return u
        fields = problem.control_constraints
        P, N, m = u.shape

        def worst(points: np.ndarray) -> np.ndarray:
            return np.max(np.column_stack([g.values_many(points) for g in fields]), axis=1)

        flat = u.reshape(-1, m)
        base = np.broadcast_to(u_hat, (P, N, m)).reshape(-1, m)
        bad = worst(flat) > 0.0
        if not bad.any():
            return u
        lo, hi = np.zeros(bad.sum()), np.ones(bad.sum())
        diff = flat[bad] - base[bad]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            ok = worst(base[bad] + mid[:, None] * diff) <= 0.0
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        flat = flat.copy()
        flat[bad] = base[bad] + lo[:, None] * diff
        return flat.reshape(P, N, m)

    @staticmethod
    def growth_probe_control(
        problem: ControlProblem,
        point: ControlTuple,
        radius: Optional[float] = None,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
        config: Optional[SubregConfig] = None,
    ) -> GrowthProbeResult:
        """Fit c in J(w) - J(ŵ) >= c (‖x - x̂‖_∞² + ‖u - û‖_2²) over admissible samples w.

        Perturbations of z = (x0, u) have independent node-wise entries and a weak
        norm uniform in (0, radius]. OCP controls are shrunk into U node by node;
        Mayer samples are retracted onto the endpoint equalities by a chord iteration
        and rejected if an endpoint inequality fails.
        """
        config = OcpService.resolve_config(config)
        radius = config.growth_radius if radius is None else radius
        samples = config.growth_samples if samples is None else samples
        seed = config.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        mesh, n, m, N, h = point.mesh, problem.n, problem.m, point.mesh.n_intervals, point.mesh.h
        dim = n + N * m
        gram_diag = np.diag(T.weak_gram(n, m, mesh))
        z_hat = T.join(point.x[0], point.u)
        q_hat = np.concatenate([point.x[0], point.x[-1]])
        j_hat = problem.cost.value(q_hat)
        is_ocp = isinstance(problem, OcpProblem)

        ratios: list[float] = []
        rejected = failures = 0
        batch = 128
        attempts = 0
        while len(ratios) < samples and attempts < 20 * samples:
            P = min(batch, 20 * samples - attempts)
            attempts += P
            d = rng.normal(size=(P, dim))
            d /= np.sqrt(np.sum(d**2 * gram_diag, axis=1, keepdims=True))
            Z = z_hat + radius * rng.uniform(size=(P, 1)) * d
            x0s, us = Z[:, :n], Z[:, n:].reshape(P, N, m)
            keep = np.ones(P, bool)
            if is_ocp:
                us = OcpService._shrink_into_control_set(problem, point.u, us)
            else:
                x0s, us, converged = OcpService._retract_endpoint(problem, point, x0s, us)
                failures += int((~converged).sum())
                keep &= converged
            xs = T.propagate_many(problem, x0s, us, mesh)
            qs = np.hstack([xs[:, 0], xs[:, -1]])
            if not is_ocp and problem.endpoint_inequalities:
                phi = np.column_stack([g.values_many(qs) for g in problem.endpoint_inequalities])
                admissible = np.max(phi, axis=1) <= 0.0
                rejected += int((keep & ~admissible).sum())
                keep &= admissible
            gains = problem.cost.values_many(qs) - j_hat
            dx = np.max(np.linalg.norm(xs - point.x[None], axis=2), axis=1)
            du2 = h * np.sum((us - point.u[None]) ** 2, axis=(1, 2))
            denom = dx**2 + du2
            keep &= denom > 1e-28
            ratios.extend((gains[keep] / denom[keep]).tolist())

        if not is_ocp and attempts and failures / attempts > C.MAX_RETRACTION_FAILURE:
            raise RetractionError(
                f"{failures}/{attempts} endpoint retractions failed; use a smaller radius"
            )
        ratios = ratios[:samples]
        if not ratios:
            return GrowthProbeResult(float("nan"), 0, rejected, failures, "no admissible samples")
        violations = tuple(r for r in ratios if r < 0.0)
        note = "negative growth" if violations else "quadratic"
        return GrowthProbeResult(
            float(min(ratios)), len(ratios), rejected, failures, note, violations
        )

    @staticmethod
    def _retract_endpoint(
        problem: MayerProblem,
        point: ControlTuple,
        x0: np.ndarray,
        u: np.ndarray,
        max_iter: int = 30,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Chord iteration onto ψ(q(z)) = 0 with the Jacobian frozen at the reference.

        Corrections are minimal in the weak norm. Returns the moved (x0, u) batch and
        a convergence mask.
        """
        P = x0.shape[0]
        if not problem.endpoint_equalities:
            return x0, u, np.ones(P, bool)
        n, m, mesh = problem.n, problem.m, point.mesh
        S = OcpService.linearized_states(problem, point)
        _, Jpsi, _ = evaluate_stack(problem.endpoint_equalities, point.trajectory.q, 2 * n)
        J = Jpsi @ T.endpoint_map(S)
        w_inv = 1.0 / np.diag(T.weak_gram(n, m, mesh))
        correction = (w_inv[:, None] * J.T) @ np.linalg.pinv((J * w_inv) @ J.T)

        z_hat = T.join(point.x[0], point.u)
        Z = np.hstack([x0, u.reshape(P, -1)])
        converged = np.zeros(P, bool)
        failed = np.zeros(P, bool)
        scale = 1.0 + float(np.max(np.abs(Z)))
        for _ in range(max_iter):
            xs = T.propagate_many(problem, Z[:, :n], Z[:, n:].reshape(P, -1, m), mesh)
            qs = np.hstack([xs[:, 0], xs[:, -1]])
            psi = np.column_stack([g.values_many(qs) for g in problem.endpoint_equalities])
            converged = ~failed & (np.max(np.abs(psi), axis=1) <= 1e-11 * scale)
            if (converged | failed).all():
                break
            Z = np.where((converged | failed)[:, None], Z, Z - psi @ correction.T)
            # diverged rows are parked at the reference and reported as failures
            failed |= np.max(np.abs(Z - z_hat), axis=1) > 1e3 * scale
            Z[failed] = z_hat
        return Z[:, :n], Z[:, n:].reshape(P, -1, m), converged

    # endregion
