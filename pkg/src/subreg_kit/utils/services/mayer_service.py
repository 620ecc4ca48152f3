"""
Service for Mayer problems on the Euler transcription.

The adjoint is linear in the endpoint data l_q = α₀φ₀' + αφ' + βψ', so every endpoint
field contributes one column to the stationarity system

    p_{i+1} f_u(x_i, u_i) = 0,    p_0 + l_{x0} = 0,

with p_N = l_{x1}. Multiplier recovery and the strict Mangasarian-Fromovitz test are
both linear problems in those columns.
"""

from typing import Optional

import numpy as np
from scipy.optimize import lsq_linear

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import EmptyNormalConeError, PreconditionError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import (
    CoercivityCertificate,
    ControlTuple,
    DiscreteTrajectory,
    EndpointMultipliers,
    MayerProblem,
    MayerResidual,
    Mesh,
    PolyhedralCone,
    QuadraticFormRep,
    StrictMfcqResult,
    evaluate_stack,
)
from subreg_kit.utils.services.base_service import BaseService
from subreg_kit.utils.services.cone_service import ConeService
from subreg_kit.utils.services.ocp_service import OcpService
from subreg_kit.utils.services.transcription_service import NodeData
from subreg_kit.utils.services.transcription_service import TranscriptionService as T

logger = get_logger(__name__)


class MayerService(BaseService):
    """Stationarity, multipliers, constraint qualification and coercivity for MayerProblem."""

    # region Endpoint columns

    @staticmethod
    def _endpoint_data(problem: MayerProblem, q: np.ndarray):
        n2 = 2 * problem.n
        cost = problem.cost.evaluate(q)
        phi, Jphi, Hphi = evaluate_stack(problem.endpoint_inequalities, q, n2)
        psi, Jpsi, Hpsi = evaluate_stack(problem.endpoint_equalities, q, n2)
        return cost, (phi, Jphi, Hphi), (psi, Jpsi, Hpsi)

    @staticmethod
    def _column(
        gradient: np.ndarray, nodes: NodeData, mesh: Mesh, n: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Adjoint induced by one endpoint gradient and its stationarity residual.

        Control rows carry the weight sqrt(h) so the stacked residual is the discrete
        L² norm of p f_u next to the Euclidean transversality defect.
        """
        p = T.adjoint(nodes.jac, mesh.h, gradient[n:])
        H_u = np.einsum("ia,iab->ib", p[1:], nodes.jac[:, :, n:])
        residual = np.concatenate([np.sqrt(mesh.h) * H_u.reshape(-1), p[0] + gradient[:n]])
        return p, residual

    @staticmethod
    def _active_inequalities(phi: np.ndarray, config: SubregConfig) -> list[int]:
        if phi.size == 0:
            return []
        t_act = config.tol_act * (1.0 + float(np.max(np.abs(phi))))
        worst = int(np.argmax(phi))
        if phi[worst] > t_act:
            raise PreconditionError(
                f"Endpoint inequality {worst} is violated: phi = {phi[worst]:.3e}"
            )
        return [i for i in range(phi.size) if phi[i] >= -t_act]

    # endregion

    # region Multipliers and residuals

    @staticmethod
    def recover_endpoint_multipliers(
        problem: MayerProblem,
        x: np.ndarray,
        u: np.ndarray,
        mesh: Mesh,
        config: Optional[SubregConfig] = None,
    ) -> tuple[EndpointMultipliers, np.ndarray, float]:
        """Least-squares (α_I, β) with α₀ = 1 and α_I >= 0.

        Returns:
            tuple: The multipliers, the adjoint (N+1, n) they induce and the residual
                of the stacked stationarity system.
        """
        config = MayerService.resolve_config(config)
        n = problem.n
        q = np.concatenate([x[0], x[-1]])
        nodes = T.node_data(problem, x, u, hessian=False)
        cost, (phi, Jphi, _), (_, Jpsi, _) = MayerService._endpoint_data(problem, q)
        active = MayerService._active_inequalities(phi, config)

        p0, r0 = MayerService._column(cost.gradient, nodes, mesh, n)
        gradients = [Jphi[i] for i in active] + list(Jpsi)
        columns = [MayerService._column(g, nodes, mesh, n) for g in gradients]

        alpha = np.zeros(len(problem.endpoint_inequalities))
        beta = np.zeros(len(problem.endpoint_equalities))
        p = p0
        residual = float(np.linalg.norm(r0))
        if columns:
            R = np.column_stack([r for _, r in columns])
            lower = np.concatenate([np.zeros(len(active)), np.full(len(beta), -np.inf)])
            solved = lsq_linear(R, -r0, bounds=(lower, np.full(R.shape[1], np.inf)))
            c = solved.x
            alpha[active] = c[: len(active)]
            beta = c[len(active) :]
            p = p0 + sum(ci * pi for ci, (pi, _) in zip(c, columns))
            residual = float(np.linalg.norm(r0 + R @ c))
        logger.debug(f"Endpoint multipliers: alpha={alpha}, beta={beta}, residual={residual:.3e}")
        return EndpointMultipliers(1.0, alpha, beta), p, residual

    @staticmethod
    def complete_tuple(
        problem: MayerProblem,
        x0: np.ndarray,
        u: np.ndarray,
        mesh: Mesh,
        config: Optional[SubregConfig] = None,
    ) -> ControlTuple:
        """Stationary tuple from (x0, u): states, endpoint multipliers and adjoint."""
        u = np.asarray(u, dtype=float)
        x = OcpService.propagate_state(problem, x0, u, mesh)
        endpoint, p, _ = MayerService.recover_endpoint_multipliers(problem, x, u, mesh, config)
        trajectory = DiscreteTrajectory(mesh, x, u)
        return ControlTuple(trajectory, p, np.zeros((mesh.n_intervals, 0)), endpoint)

    @staticmethod
    def mayer_stationarity(
        problem: MayerProblem, point: ControlTuple, config: Optional[SubregConfig] = None
    ) -> MayerResidual:
        """Residual (π, ρ, ν, η, μ, ξ) of the discrete Mayer optimality system.

        ‖z‖ = ‖π‖₁ + ‖ρ‖₂ + |ν| + ‖η‖₁ + |μ| + |ξ|.

        Raises:
            PreconditionError: If the tuple carries no endpoint multipliers.
            EmptyNormalConeError: If α₀ or some α_i is negative.
        """
        config = MayerService.resolve_config(config)
        endpoint = point.endpoint
        if endpoint is None:
            raise PreconditionError("Mayer tuple has no endpoint multipliers")
        alpha = np.asarray(endpoint.alpha, dtype=float)
        if endpoint.alpha0 < -C.TOL_SIGN or (alpha.size and np.min(alpha) < -C.TOL_SIGN):
            raise EmptyNormalConeError(
                f"Endpoint multipliers must be non-negative: alpha0={endpoint.alpha0}, "
                f"alpha={alpha}"
            )

        n, h = problem.n, point.mesh.h
        x, u, p = point.x, point.u, point.p
        q = point.trajectory.q
        cost, (phi, Jphi, _), (psi, Jpsi, _) = MayerService._endpoint_data(problem, q)
        lq = endpoint.alpha0 * cost.gradient + alpha @ Jphi + np.asarray(endpoint.beta) @ Jpsi

        nodes = T.node_data(problem, x, u, hessian=False)
        pi = np.diff(p, axis=0) / h + np.einsum("ia,iab->ib", p[1:], nodes.jac[:, :, :n])
        rho = np.einsum("ia,iab->ib", p[1:], nodes.jac[:, :, n:])
        nu = np.concatenate([p[0] + lq[:n], lq[n:] - p[-1]])
        eta = nodes.f - np.diff(x, axis=0) / h
        mu = psi
        xi = np.where(alpha > config.tol_mul, phi, np.maximum(phi, 0.0))

        norm = (
            T.time_l1(pi, h)
            + T.time_l2(rho, h)
            + float(np.linalg.norm(nu))
            + T.time_l1(eta, h)
            + float(np.linalg.norm(mu))
            + float(np.linalg.norm(xi))
        )
        return MayerResidual(pi, rho, nu, eta, mu, xi, norm)

    # endregion

    # region Constraint qualification

    @staticmethod
    def check_strict_mf_mayer(
        problem: MayerProblem, point: ControlTuple, config: Optional[SubregConfig] = None
    ) -> StrictMfcqResult:
        """Strict Mangasarian-Fromovitz analogue: the homogeneous system with α₀ = 0,
        α_i >= 0 on the biactive set, forces α = 0, β = 0 (and hence p = 0).

        The witness, when it fails, is the stacked (α_I, β) vector.
        """
        config = MayerService.resolve_config(config)
        n = problem.n
        nodes = T.node_data(problem, point.x, point.u, hessian=False)
        _, (phi, Jphi, _), (_, Jpsi, _) = MayerService._endpoint_data(problem, point.trajectory.q)
        active = MayerService._active_inequalities(phi, config)
        gradients = [Jphi[i] for i in active] + list(Jpsi)
        if not gradients:
            return StrictMfcqResult(True, None, "no endpoint constraints", True)

        R = np.column_stack([MayerService._column(g, nodes, point.mesh, n)[1] for g in gradients])
        alpha = point.endpoint.alpha if point.endpoint is not None else np.zeros(phi.size)
        signed = [pos for pos, i in enumerate(active) if alpha[i] <= config.tol_mul]
        witness = MayerService.nonzero_signed_kernel_vector(R, signed, config.tol_rank)
        if witness is None:
            return StrictMfcqResult(True, None, "homogeneous endpoint system is trivial", True)
        logger.info(f"Strict MF fails for '{problem.name}': witness {witness}")
        return StrictMfcqResult(
            False, witness, "nontrivial homogeneous endpoint multipliers", False
        )

    # endregion

    # region Second order

    @staticmethod
    def mayer_critical_cone(
        problem: MayerProblem, point: ControlTuple, config: Optional[SubregConfig] = None
    ) -> PolyhedralCone:
        """Critical cone on z = (x0, u): φ₀'S_q v <= 0, φ_i'S_q v <= 0 (i active), ψ'S_q v = 0."""
        config = MayerService.resolve_config(config)
        _, (phi, Jphi, _), (_, Jpsi, _) = MayerService._endpoint_data(problem, point.trajectory.q)
        Sq = T.endpoint_map(OcpService.linearized_states(problem, point))
        active = MayerService._active_inequalities(phi, config)
        cost_row = problem.cost.evaluate(point.trajectory.q).gradient @ Sq
        ineq = np.vstack([cost_row[None, :]] + [Jphi[i] @ Sq for i in active])
        eq = Jpsi @ Sq if Jpsi.shape[0] else None
        return PolyhedralCone.from_rows(Sq.shape[1], ineq, eq)

    @staticmethod
    def quadratic_form_mayer(problem: MayerProblem, point: ControlTuple) -> QuadraticFormRep:
        """Reduced ⟨l_qq q, q⟩ + Σ h ⟨H_ww w_i, w_i⟩ on z with Gram diag(I_n, h I)."""
        return OcpService.quadratic_form_ocp(problem, point)

    @staticmethod
    def certify_coercivity_mayer(
        problem: MayerProblem, point: ControlTuple, config: Optional[SubregConfig] = None
    ) -> CoercivityCertificate:
        config = MayerService.resolve_config(config)
        cone = MayerService.mayer_critical_cone(problem, point, config)
        form = MayerService.quadratic_form_mayer(problem, point)
        certificate = ConeService.certify_coercivity(form, cone, config)
        logger.info(
            f"Mayer coercivity: certified={certificate.certified} "
            f"c={certificate.c0:.6g} ({certificate.method})"
        )
        return certificate

    # endregion
