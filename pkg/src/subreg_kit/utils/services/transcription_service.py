"""
Explicit Euler transcription of control problems.

The decision vector is z = (x0, u_0, ..., u_{N-1}); states follow
x_{i+1} = x_i + h (f(x_i, u_i) - s_i) for a dynamics shift s (zero unless a
perturbation is applied). Adjoints are the exact discrete adjoints of this scheme:

    p_N = l_{x1}(q),    p_i = p_{i+1} (I + h f_x(x_i, u_i)) - h π_i.

The same scheme turns a perturbed optimality system of an OCP or Mayer problem
into the KKT system of a perturbed NLP on z, which is what TranscribedModel exposes.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from subreg_kit.utils.core.errors import ProblemInputError, PropagationError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data.models import (
    ControlTuple,
    DiscreteTrajectory,
    EndpointMultipliers,
    MayerProblem,
    Mesh,
    OcpProblem,
    Perturbation,
    evaluate_stack,
    evaluate_stack_many,
)
from subreg_kit.utils.services.base_service import BaseService
from subreg_kit.utils.services.newton_service import KktEvaluation, KktPoint

logger = get_logger(__name__)

ControlProblem = Union[OcpProblem, MayerProblem]


@dataclass(frozen=True)
class NodeData:
    """Dynamics at the left node of every interval: values, Jacobians, Hessians."""

    f: np.ndarray  # (N, n)
    jac: np.ndarray  # (N, n, n+m)
    hess: Optional[np.ndarray] = None  # (N, n, n+m, n+m)


class TranscriptionService(BaseService):
    """Euler recursions, sensitivities, reduced Hessians and discrete norms."""

    # region Layout

    @staticmethod
    def mesh_for(problem: ControlProblem, n_intervals: int) -> Mesh:
        t0, t1 = problem.horizon
        return Mesh(int(n_intervals), float(t0), float(t1))

    @staticmethod
    def split(z: np.ndarray, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        return z[:n], z[n:].reshape(-1, m)

    @staticmethod
    def join(x0: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [np.asarray(x0, dtype=float).reshape(-1), np.asarray(u, dtype=float).reshape(-1)]
        )

    @staticmethod
    def control_columns(n: int, m: int, node: int) -> slice:
        return slice(n + node * m, n + (node + 1) * m)

    # endregion

    # region Recursions

    @staticmethod
    def propagate(
        problem: ControlProblem,
        x0: np.ndarray,
        u: np.ndarray,
        mesh: Mesh,
        shift: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Euler states (N+1, n) for controls u (N, m).

        Raises:
            PropagationError: At the first node where the state is not finite.
        """
        N, n, m = mesh.n_intervals, problem.n, problem.m
        x0 = np.asarray(x0, dtype=float).reshape(1, n)
        u = np.asarray(u, dtype=float).reshape(1, N, m)
        return TranscriptionService.propagate_many(problem, x0, u, mesh, shift)[0]

    @staticmethod
    def propagate_many(
        problem: ControlProblem,
        x0: np.ndarray,
        u: np.ndarray,
        mesh: Mesh,
        shift: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Batched propagate: x0 (P, n), u (P, N, m) -> states (P, N+1, n)."""
        P, n, N = x0.shape[0], problem.n, mesh.n_intervals
        x = np.zeros((P, N + 1, n))
        x[:, 0] = x0
        h = mesh.h
        for i in range(N):
            w = np.hstack([x[:, i], u[:, i]])
            rate = np.column_stack([f.values_many(w) for f in problem.dynamics])
            if shift is not None:
                rate = rate - shift[i]
            x[:, i + 1] = x[:, i] + h * rate
            if not np.all(np.isfinite(x[:, i + 1])):
                raise PropagationError("State is not finite", i + 1)
        return x

    @staticmethod
    def node_data(
        problem: ControlProblem, x: np.ndarray, u: np.ndarray, hessian: bool = True
    ) -> NodeData:
        N = u.shape[0]
        points = np.hstack([x[:N], u])
        values, jac, hess = evaluate_stack_many(problem.dynamics, points, problem.n + problem.m)
        return NodeData(values, jac, hess if hessian else None)

    @staticmethod
    def adjoint(
        jac: np.ndarray,
        h: float,
        terminal: np.ndarray,
        pi: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Backward recursion p_i = p_{i+1}(I + h f_x) - h π_i from p_N = terminal.

        Raises:
            PropagationError: At the first node where the adjoint is not finite.
        """
        N, n = jac.shape[0], jac.shape[1]
        p = np.zeros((N + 1, n))
        p[N] = terminal
        for i in range(N - 1, -1, -1):
            p[i] = p[i + 1] + h * p[i + 1] @ jac[i, :, :n]
            if pi is not None:
                p[i] -= h * pi[i]
            if not np.all(np.isfinite(p[i])):
                raise PropagationError("Adjoint is not finite", i)
        return p

    @staticmethod
    def sensitivities(jac: np.ndarray, h: float, n: int, m: int) -> np.ndarray:
        """S_i = ∂x_i/∂z, shape (N+1, n, n + N m)."""
        N = jac.shape[0]
        dim = n + N * m
        S = np.zeros((N + 1, n, dim))
        S[0, :, :n] = np.eye(n)
        for i in range(N):
            S[i + 1] = S[i] + h * jac[i, :, :n] @ S[i]
            S[i + 1, :, TranscriptionService.control_columns(n, m, i)] += h * jac[i, :, n:]
        return S

    @staticmethod
    def endpoint_map(S: np.ndarray) -> np.ndarray:
        """∂q/∂z with q = (x_0, x_N), shape (2n, dim)."""
        return np.vstack([S[0], S[-1]])

    @staticmethod
    def reduced_hessian(
        S: np.ndarray,
        endpoint_hessian: np.ndarray,
        hbar: np.ndarray,
        h: float,
        n: int,
        m: int,
    ) -> np.ndarray:
        """S_qᵀ l_qq S_q + Σ_i h W_iᵀ H̄_i W_i with W_i = ∂(x_i, u_i)/∂z."""
        N = hbar.shape[0]
        Sq = TranscriptionService.endpoint_map(S)
        Sx = S[:N]
        H = Sq.T @ endpoint_hessian @ Sq
        H += h * np.einsum("iad,iab,ibe->de", Sx, hbar[:, :n, :n], Sx, optimize=True)
        cross = h * np.einsum("iad,iab->dib", Sx, hbar[:, :n, n:]).reshape(-1, N * m)
        H[:, n:] += cross
        H[n:, :] += cross.T
        for i in range(N):
            cols = TranscriptionService.control_columns(n, m, i)
            H[cols, cols] += h * hbar[i, n:, n:]
        return 0.5 * (H + H.T)

    # endregion

    # region Discrete norms

    @staticmethod
    def w11_norm(x: np.ndarray) -> float:
        """|x_0| + Σ |x_{i+1} - x_i|."""
        x = np.asarray(x, dtype=float).reshape(x.shape[0], -1)
        return float(np.linalg.norm(x[0]) + np.sum(np.linalg.norm(np.diff(x, axis=0), axis=1)))

    @staticmethod
    def time_l1(v: np.ndarray, h: float) -> float:
        v = np.asarray(v, dtype=float)
        if v.size == 0:
            return 0.0
        return float(h * np.sum(np.linalg.norm(v.reshape(v.shape[0], -1), axis=1)))

    @staticmethod
    def time_l2(v: np.ndarray, h: float) -> float:
        v = np.asarray(v, dtype=float)
        if v.size == 0:
            return 0.0
        return float(np.sqrt(h * np.sum(v**2)))

    @staticmethod
    def time_linf(v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        if v.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(v.reshape(v.shape[0], -1), axis=1)))

    @staticmethod
    def strong_norm(x: np.ndarray, u: np.ndarray) -> float:
        """‖x‖_{1,1} + ‖u‖_∞."""
        return TranscriptionService.w11_norm(x) + TranscriptionService.time_linf(u)

    @staticmethod
    def weak_norm(x: np.ndarray, u: np.ndarray, h: float) -> float:
        """‖x‖_∞ + ‖u‖_2."""
        return TranscriptionService.time_linf(x) + TranscriptionService.time_l2(u, h)

    @staticmethod
    def weak_gram(n: int, m: int, mesh: Mesh) -> np.ndarray:
        """Gram of |x(0)|² + ‖u‖_2² on z = (x0, u)."""
        return np.diag(np.concatenate([np.ones(n), np.full(mesh.n_intervals * m, mesh.h)]))

    # endregion


class TranscribedModel:
    """KKT model of the transcribed, perturbed control problem on z = (x0, u).

    OCP (blocks ν, π, ρ, ξ, η):
        min F(q) - ν·q - Σ h π_i·x_i - Σ h ρ_i·u_i  s.t. G(u_i) - η_i <= 0,
        with dynamics shift ξ; multipliers μ_ij = h λ_ij.
    Mayer (blocks π, ρ, ν, η, μ, ξ):
        min φ₀(q) - ν·q - Σ h π_i·x_i - Σ h ρ_i·u_i  s.t. φ(q) - ξ <= 0, ψ(q) - μ = 0,
        with dynamics shift η; multipliers (α, β).
    """

    def __init__(
        self,
        problem: ControlProblem,
        mesh: Mesh,
        perturbation: Optional[Perturbation] = None,
    ):
        self.problem = problem
        self.mesh = mesh
        self.n, self.m, self.N = problem.n, problem.m, mesh.n_intervals
        self.h = mesh.h
        self.dim = self.n + self.N * self.m
        self.is_ocp = isinstance(problem, OcpProblem)
        blocks = perturbation.blocks if perturbation is not None else {}

        def block(name: str, shape: tuple[int, ...]) -> np.ndarray:
            value = np.asarray(blocks.get(name, np.zeros(shape)), dtype=float)
            if value.shape != shape:
                raise ProblemInputError(
                    f"Perturbation block {name} has shape {value.shape}, expected {shape}"
                )
            return value

        n, m, N = self.n, self.m, self.N
        self.nu = block("nu", (2 * n,))
        self.pi = block("pi", (N, n))
        self.rho = block("rho", (N, m))
        if self.is_ocp:
            k = problem.k
            self.dyn_shift = block("xi", (N, n))
            self.ineq_shift = block("eta", (N, k)).reshape(-1)
            self.eq_shift = np.zeros(0)
            self.n_ineq, self.n_eq = N * k, 0
        else:
            self.dyn_shift = block("eta", (N, n))
            self.ineq_shift = block("xi", (len(problem.endpoint_inequalities),))
            self.eq_shift = block("mu", (len(problem.endpoint_equalities),))
            self.n_ineq = len(problem.endpoint_inequalities)
            self.n_eq = len(problem.endpoint_equalities)

    def states(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x0, u = TranscriptionService.split(z, self.n, self.m)
        x = TranscriptionService.propagate(self.problem, x0, u, self.mesh, self.dyn_shift)
        return x0, u, x

    def _control_constraints(self, u: np.ndarray):
        return evaluate_stack_many(self.problem.control_constraints, u, self.m)

    def _endpoint_lagrangian(
        self, q: np.ndarray, ineq_mult: np.ndarray, eq_mult: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Gradient and Hessian of cost + α·φ + β·ψ at q (OCP: cost only)."""
        cost = self.problem.cost.evaluate(q)
        grad, hess = cost.gradient.copy(), cost.hessian.copy()
        if not self.is_ocp:
            for mult, fields in (
                (ineq_mult, self.problem.endpoint_inequalities),
                (eq_mult, self.problem.endpoint_equalities),
            ):
                if fields:
                    _, J, H = evaluate_stack(fields, q, 2 * self.n)
                    grad += mult @ J
                    hess += np.einsum("i,ijk->jk", mult, H)
        return grad, hess

    def evaluate(
        self, z: np.ndarray, ineq_mult: np.ndarray, eq_mult: np.ndarray, hessian: bool = True
    ) -> KktEvaluation:
        n, m, N, h = self.n, self.m, self.N, self.h
        x0, u, x = self.states(z)
        nodes = TranscriptionService.node_data(self.problem, x, u, hessian)
        S = TranscriptionService.sensitivities(nodes.jac, h, n, m)
        Sq = TranscriptionService.endpoint_map(S)
        q = np.concatenate([x[0], x[-1]])

        cost = self.problem.cost.evaluate(q)
        objective = (
            cost.value
            - float(self.nu @ q)
            - h * float(np.sum(self.pi * x[:N]))
            - h * float(np.sum(self.rho * u))
        )
        gradient = (cost.gradient - self.nu) @ Sq - h * np.einsum("ia,iad->d", self.pi, S[:N])
        gradient[n:] -= h * self.rho.reshape(-1)

        if self.is_ocp:
            k = self.problem.k
            Gv, GJ, GH = self._control_constraints(u)
            ineq = Gv.reshape(-1) - self.ineq_shift
            blocks = np.zeros((N, k, N, m))
            idx = np.arange(N)
            blocks[idx, :, idx, :] = GJ
            ineq_jac = np.hstack([np.zeros((N * k, n)), blocks.reshape(N * k, N * m)])
            eq, eq_jac = np.zeros(0), np.zeros((0, self.dim))
        else:
            phi, Jphi, _ = evaluate_stack(self.problem.endpoint_inequalities, q, 2 * n)
            psi, Jpsi, _ = evaluate_stack(self.problem.endpoint_equalities, q, 2 * n)
            ineq, ineq_jac = phi - self.ineq_shift, Jphi @ Sq
            eq, eq_jac = psi - self.eq_shift, Jpsi @ Sq

        H = None
        if hessian:
            lq, lqq = self._endpoint_lagrangian(q, ineq_mult, eq_mult)
            p = TranscriptionService.adjoint(nodes.jac, h, lq[n:] - self.nu[n:], self.pi)
            hbar = np.einsum("ia,iabc->ibc", p[1:], nodes.hess)
            if self.is_ocp and self.problem.k:
                lam = np.asarray(ineq_mult, dtype=float).reshape(N, self.problem.k) / h
                hbar[:, n:, n:] += np.einsum("ij,ijab->iab", lam, GH)
            H = TranscriptionService.reduced_hessian(S, lqq, hbar, h, n, m)

        return KktEvaluation(objective, gradient, ineq, ineq_jac, eq, eq_jac, H)

    def control_tuple(self, point: KktPoint) -> ControlTuple:
        """Recover (x, u, p, λ) or (x, u, p, α, β) from a KKT point of the model."""
        n, m, N, h = self.n, self.m, self.N, self.h
        x0, u, x = self.states(point.z)
        nodes = TranscriptionService.node_data(self.problem, x, u, hessian=False)
        q = np.concatenate([x[0], x[-1]])
        lq, _ = self._endpoint_lagrangian(q, point.ineq_mult, point.eq_mult)
        p = TranscriptionService.adjoint(nodes.jac, h, lq[n:] - self.nu[n:], self.pi)
        trajectory = DiscreteTrajectory(self.mesh, x, u)
        if self.is_ocp:
            lam = np.asarray(point.ineq_mult, dtype=float).reshape(N, self.problem.k) / h
            return ControlTuple(trajectory, p, lam)
        endpoint = EndpointMultipliers(
            1.0, np.array(point.ineq_mult, dtype=float), np.array(point.eq_mult, dtype=float)
        )
        return ControlTuple(trajectory, p, np.zeros((N, 0)), endpoint)

    @staticmethod
    def kkt_point(problem: ControlProblem, reference: ControlTuple) -> KktPoint:
        """The model-space KKT point of a stationary control tuple."""
        z = TranscriptionService.join(reference.x[0], reference.u)
        if isinstance(problem, OcpProblem):
            return KktPoint(z, reference.mesh.h * reference.lam.reshape(-1), np.zeros(0))
        endpoint = reference.endpoint
        if endpoint is None:
            raise ProblemInputError("Mayer reference tuple has no endpoint multipliers")
        return KktPoint(
            z, np.asarray(endpoint.alpha, dtype=float), np.asarray(endpoint.beta, dtype=float)
        )
