"""
Service reproducing the example1 counterexample.

example1 minimizes x(1) - x(0) subject to x' = t u - u², u >= 0, with the clock t
carried as a first state. The reference û = 0 is stationary with p ≡ 1 and λ(t) = t,
its discrete critical cone pins every control node except the biactive node at
t = 0, and yet the controls u_s = 1/s on [0, 1/s] reach

    J(u_s) = -1/(2 s³)    (Euler: -1/(2 s³) - h/(2 s²))

while ‖u_s - û‖_∞ = 1/s → 0.
"""

from typing import Optional, Sequence

import numpy as np

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import (
    ControlTuple,
    CounterexampleReport,
    CounterexampleRow,
    Mesh,
    OcpProblem,
)
from subreg_kit.utils.services.base_service import BaseService
from subreg_kit.utils.services.ocp_service import OcpService
from subreg_kit.utils.services.transcription_service import TranscriptionService as T

logger = get_logger(__name__)


class CounterexampleService(BaseService):

    @staticmethod
    def closed_form(s: int) -> float:
        return -1.0 / (2.0 * s**3)

    @staticmethod
    def competitor_controls(s: int, mesh: Mesh) -> np.ndarray:
        """u_s on the mesh, shape (N, 1).

        Raises:
            ProblemInputError: If N is not divisible by s.
        """
        N = mesh.n_intervals
        if s < 1 or N % s:
            raise ProblemInputError(f"Mesh with N={N} intervals cannot represent u_s for s={s}")
        u = np.zeros((N, 1))
        u[: N // s, 0] = 1.0 / s
        return u

    @staticmethod
    def example1_counterexample(
        problem: OcpProblem,
        reference: ControlTuple,
        s_values: Sequence[int] = C.COUNTEREXAMPLE_S_VALUES,
        config: Optional[SubregConfig] = None,
    ) -> CounterexampleReport:
        """Cost of u_s for each s, the cone triviality check and the multiplier check."""
        config = CounterexampleService.resolve_config(config)
        mesh = reference.mesh
        x0 = reference.x[0]
        reference_cost = problem.cost.value(reference.trajectory.q)

        rows = []
        for s in s_values:
            u = CounterexampleService.competitor_controls(int(s), mesh)
            x = OcpService.propagate_state(problem, x0, u, mesh)
            j_value = problem.cost.value(np.concatenate([x[0], x[-1]])) - reference_cost
            exact = CounterexampleService.closed_form(int(s))
            rows.append(
                CounterexampleRow(
                    int(s),
                    float(j_value),
                    exact,
                    abs(j_value - exact) / abs(exact),
                    T.time_linf(u - reference.u),
                )
            )
            logger.debug(f"s={s}: J={j_value:.6g} closed form {exact:.6g}")

        cone = OcpService.discrete_critical_cone_ocp(problem, reference, config=config)
        component = OcpService.control_component_report(
            cone, problem.n, problem.m, mesh, config
        )
        deviation = float(np.max(np.abs(reference.lam[:, 0] - mesh.left_nodes)))
        logger.info(
            f"Counterexample: {len(rows)} competitors, control component trivial="
            f"{component.trivial}, multiplier deviation {deviation:.3e}"
        )
        return CounterexampleReport(tuple(rows), mesh, reference_cost, component, deviation)
