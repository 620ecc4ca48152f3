"""
Data models for problems, reference solutions and analysis results.

Arrays are numpy float arrays. Multipliers for inequality constraints are
componentwise non-negative at stationary points; the models do not enforce sign
conditions so that the services can report them.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Optional, Union

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize, nnls

from subreg_kit.utils.core.errors import ProblemInputError

ProblemKind = Literal["nlp", "mayer", "ocp"]


# region Fields


@dataclass(frozen=True)
class FieldValue:
    """Value, gradient and Hessian of a scalar field at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


class ScalarField(ABC):
    """A C² map R^d -> R that can report exact first and second derivatives."""

    dimension: int

    @abstractmethod
    def evaluate(self, point: np.ndarray) -> FieldValue:
        """Return the value, gradient and Hessian at `point`."""

    def value(self, point: np.ndarray) -> float:
        return self.evaluate(point).value

    def __call__(self, point: np.ndarray) -> float:
        return self.value(point)

    def evaluate_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate at every row of `points` (P, d).

        Returns values (P,), gradients (P, d) and Hessians (P, d, d).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        P, d = points.shape
        values, gradients, hessians = np.zeros(P), np.zeros((P, d)), np.zeros((P, d, d))
        for i, point in enumerate(points):
            fv = self.evaluate(point)
            values[i], gradients[i], hessians[i] = fv.value, fv.gradient, fv.hessian
        return values, gradients, hessians

    def values_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.array([self.value(point) for point in points])


class CallableField(ScalarField):
    """Scalar field backed by a user oracle returning (value, gradient, hessian)."""

    def __init__(
        self,
        dimension: int,
        oracle: Callable[[np.ndarray], tuple[float, Any, Any]],
        label: str = "callable",
    ):
        if dimension < 1:
            raise ProblemInputError(f"Field dimension must be positive, got {dimension}")
        self.dimension = dimension
        self._oracle = oracle
        self.label = label

    def evaluate(self, point: np.ndarray) -> FieldValue:
        value, gradient, hessian = self._oracle(np.asarray(point, dtype=float))
        return FieldValue(
            float(value),
            np.asarray(gradient, dtype=float).reshape(self.dimension),
            np.asarray(hessian, dtype=float).reshape(self.dimension, self.dimension),
        )

    def __repr__(self) -> str:
        return f"CallableField({self.label}, d={self.dimension})"


def evaluate_stack(
    fields: tuple[ScalarField, ...], point: np.ndarray, dimension: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate several fields sharing one argument.

    Returns:
        tuple: values (r,), Jacobian (r, d) and Hessians (r, d, d).
    """
    r = len(fields)
    values = np.zeros(r)
    jacobian = np.zeros((r, dimension))
    hessians = np.zeros((r, dimension, dimension))
    for i, f in enumerate(fields):
        fv = f.evaluate(point)
        values[i] = fv.value
        jacobian[i] = fv.gradient
        hessians[i] = fv.hessian
    return values, jacobian, hessians


def evaluate_stack_many(
    fields: tuple[ScalarField, ...], points: np.ndarray, dimension: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched evaluate_stack over the rows of `points` (P, d).

    Returns:
        tuple: values (P, r), Jacobians (P, r, d) and Hessians (P, r, d, d).
    """
    points = np.asarray(points, dtype=float).reshape(-1, dimension)
    P, r = points.shape[0], len(fields)
    values = np.zeros((P, r))
    jacobians = np.zeros((P, r, dimension))
    hessians = np.zeros((P, r, dimension, dimension))
    for j, f in enumerate(fields):
        values[:, j], jacobians[:, j], hessians[:, j] = f.evaluate_many(points)
    return values, jacobians, hessians


def _check_fields(fields: tuple[ScalarField, ...], dimension: int, role: str) -> None:
    for i, f in enumerate(fields):
        if f.dimension != dimension:
            raise ProblemInputError(
                f"{role}[{i}] has dimension {f.dimension}, expected {dimension}"
            )


# endregion

# region Problems


@dataclass(frozen=True)
class NlpProblem:
    """min objective(x) s.t. inequalities(x) <= 0, equalities(x) = 0, x in R^n."""

    n: int
    objective: ScalarField
    inequalities: tuple[ScalarField, ...] = ()
    equalities: tuple[ScalarField, ...] = ()
    name: str = "nlp"

    def __post_init__(self):
        if self.n < 1:
            raise ProblemInputError(f"n must be positive, got {self.n}")
        _check_fields((self.objective,), self.n, "objective")
        _check_fields(self.inequalities, self.n, "ineq")
        _check_fields(self.equalities, self.n, "eq")

    @property
    def kind(self) -> ProblemKind:
        return "nlp"

    @property
    def m(self) -> int:
        return len(self.inequalities)

    @property
    def k(self) -> int:
        return len(self.equalities)


@dataclass(frozen=True)
class MayerProblem:
    """min cost(x(t0), x(t1)) over ẋ = f(x, u) with endpoint equalities and inequalities.

    Dynamics fields take the concatenated argument (x, u); endpoint fields take
    q = (x(t0), x(t1)).
    """

    n: int
    m: int
    dynamics: tuple[ScalarField, ...]
    cost: ScalarField
    endpoint_equalities: tuple[ScalarField, ...] = ()
    endpoint_inequalities: tuple[ScalarField, ...] = ()
    horizon: tuple[float, float] = (0.0, 1.0)
    name: str = "mayer"

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ProblemInputError(f"n and m must be positive, got n={self.n}, m={self.m}")
        if len(self.dynamics) != self.n:
            raise ProblemInputError(
                f"Expected {self.n} dynamics components, got {len(self.dynamics)}"
            )
        _check_fields(self.dynamics, self.n + self.m, "dynamics")
        _check_fields((self.cost,), 2 * self.n, "endpoint")
        _check_fields(self.endpoint_equalities, 2 * self.n, "eq")
        _check_fields(self.endpoint_inequalities, 2 * self.n, "ineq")
        if not self.horizon[1] > self.horizon[0]:
            raise ProblemInputError(f"Horizon must satisfy t0 < t1, got {self.horizon}")

    @property
    def kind(self) -> ProblemKind:
        return "mayer"

    @property
    def k(self) -> int:
        return 0


@dataclass(frozen=True)
class OcpProblem:
    """min F(x(0), x(1)) over ẋ = f(x, u), G(u(t)) <= 0 on [0, 1], x(0) free."""

    n: int
    m: int
    k: int
    dynamics: tuple[ScalarField, ...]
    cost: ScalarField
    control_constraints: tuple[ScalarField, ...]
    name: str = "ocp"
    horizon: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ProblemInputError(f"n and m must be positive, got n={self.n}, m={self.m}")
        if len(self.dynamics) != self.n:
            raise ProblemInputError(
                f"Expected {self.n} dynamics components, got {len(self.dynamics)}"
            )
        if len(self.control_constraints) != self.k:
            raise ProblemInputError(
                f"Expected {self.k} control constraints, got {len(self.control_constraints)}"
            )
        _check_fields(self.dynamics, self.n + self.m, "dynamics")
        _check_fields((self.cost,), 2 * self.n, "endpoint")
        _check_fields(self.control_constraints, self.m, "control_ineq")
        if self.k and not control_set_nonempty(self.control_constraints, self.m):
            raise ProblemInputError("Control set U = {v : G(v) <= 0} appears to be empty")

    @property
    def kind(self) -> ProblemKind:
        return "ocp"

    @property
    def endpoint_equalities(self) -> tuple[ScalarField, ...]:
        return ()

    @property
    def endpoint_inequalities(self) -> tuple[ScalarField, ...]:
        return ()


Problem = Union[NlpProblem, MayerProblem, OcpProblem]


def control_set_nonempty(constraints: tuple[ScalarField, ...], m: int, seed: int = 0) -> bool:
    """Feasibility probe for U: sampled points first, then a Nelder-Mead descent of max_j G_j."""

    def worst(v: np.ndarray) -> float:
        return max(g.value(v) for g in constraints)

    rng = np.random.default_rng(seed)
    candidates = [np.zeros(m)]
    candidates += [rng.normal(scale=s, size=m) for s in (1.0, 10.0) for _ in range(16)]
    best = min(candidates, key=worst)
    if worst(best) <= 0.0:
        return True
    result = minimize(worst, best, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    return bool(worst(result.x) <= 1e-12)


# endregion

# region Reference tuples


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of `n_intervals` intervals on [t0, t1]."""

    n_intervals: int
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n_intervals, (int, np.integer)) or self.n_intervals < 2:
            raise ProblemInputError(f"Mesh needs at least 2 intervals, got {self.n_intervals}")
        if not self.t1 > self.t0:
            raise ProblemInputError(f"Mesh needs t0 < t1, got [{self.t0}, {self.t1}]")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.n_intervals

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_intervals + 1)

    @property
    def left_nodes(self) -> np.ndarray:
        return self.nodes[:-1]

    @property
    def length(self) -> float:
        return self.t1 - self.t0


@dataclass(frozen=True)
class NlpTuple:
    """Reference point (x̂, λ̂, ŷ) of a nonlinear program."""

    x: np.ndarray
    lam: np.ndarray
    y: np.ndarray

    @classmethod
    def of(cls, x: Any, lam: Any = (), y: Any = ()) -> "NlpTuple":
        return cls(
            np.atleast_1d(np.asarray(x, dtype=float)),
            np.asarray(lam, dtype=float).reshape(-1),
            np.asarray(y, dtype=float).reshape(-1),
        )


@dataclass(frozen=True)
class DiscreteTrajectory:
    """States on the N+1 nodes and controls on the N intervals of a mesh."""

    mesh: Mesh
    x: np.ndarray  # (N+1, n)
    u: np.ndarray  # (N, m)

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.x[0], self.x[-1]])


@dataclass(frozen=True)
class EndpointMultipliers:
    """(α₀, α, β) of a Mayer problem; α₀ = 1 at a normal stationary point."""

    alpha0: float
    alpha: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class ControlTuple:
    """Discrete stationary tuple of an OCP or Mayer problem.

    `lam` holds the control-constraint multipliers (N, k) of an OCP; `endpoint`
    holds the endpoint multipliers of a Mayer problem.
    """

    trajectory: DiscreteTrajectory
    p: np.ndarray  # (N+1, n)
    lam: np.ndarray  # (N, k)
    endpoint: Optional[EndpointMultipliers] = None

    @property
    def mesh(self) -> Mesh:
        return self.trajectory.mesh

    @property
    def x(self) -> np.ndarray:
        return self.trajectory.x

    @property
    def u(self) -> np.ndarray:
        return self.trajectory.u


@dataclass(frozen=True)
class AdjointPath:
    p: np.ndarray  # (N+1, n)
    transversality_defect: float


@dataclass(frozen=True)
class MultiplierPath:
    lam: np.ndarray  # (N, k)
    max_residual: float
    min_component: float


# endregion

# region NLP results


@dataclass(frozen=True)
class ActiveSets:
    """Active set I, biactive part I0 (zero multiplier) and strictly active part I1."""

    active: tuple[int, ...]
    inactive_mult: tuple[int, ...]
    positive_mult: tuple[int, ...]


@dataclass(frozen=True)
class KktResidualNlp:
    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    norm: float


@dataclass(frozen=True)
class MfcqResult:
    holds: bool
    witness: Optional[np.ndarray] = None
    reason: str = ""
    interior_direction: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StrictMfcqResult:
    holds: bool
    witness: Optional[np.ndarray] = None
    reason: str = ""
    multipliers_unique: bool = False


@dataclass(frozen=True)
class GrowthProbeResult:
    fitted_c: float
    n_samples: int
    n_rejected: int
    n_retraction_failures: int
    note: str = ""
    violations: tuple[float, ...] = ()  # negative growth ratios


@dataclass(frozen=True)
class FiniteDifferenceReport:
    steps: tuple[float, ...]
    remainders: tuple[float, ...]
    observed_order: Optional[float]
    passed: bool
    reason: str = ""


# endregion

# region Cones and quadratic forms


@dataclass(frozen=True)
class PolyhedralCone:
    """{v : A v <= 0, B v = 0} in R^dim."""

    A: np.ndarray
    B: np.ndarray
    dim: int

    @classmethod
    def from_rows(cls, dim: int, ineq: Any = None, eq: Any = None) -> "PolyhedralCone":
        A = np.zeros((0, dim)) if ineq is None or len(ineq) == 0 else np.asarray(ineq, dtype=float)
        B = np.zeros((0, dim)) if eq is None or len(eq) == 0 else np.asarray(eq, dtype=float)
        return cls(A.reshape(-1, dim), B.reshape(-1, dim), dim)

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        scale = tol * max(1.0, float(np.linalg.norm(v)))
        if self.A.size and np.max(self.A @ v) > scale:
            return False
        if self.B.size and np.max(np.abs(self.B @ v)) > scale:
            return False
        return True

    def equality_basis(self) -> np.ndarray:
        """Orthonormal basis (dim, r) of the kernel of B."""
        if self.B.shape[0] == 0:
            return np.eye(self.dim)
        return null_space(self.B)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the cone (Moreau decomposition with NNLS)."""
        Z = self.equality_basis()
        if Z.shape[1] == 0:
            return np.zeros(self.dim)
        w = Z.T @ v
        if self.A.shape[0]:
            C = self.A @ Z
            mu, _ = nnls(C.T, w)
            w = w - C.T @ mu
        return Z @ w


@dataclass(frozen=True)
class QuadraticFormRep:
    """Symmetric form Ω and the Gram matrix of the weak norm it is compared against."""

    matrix: np.ndarray
    weak_norm_gram: np.ndarray

    def value(self, v: np.ndarray) -> float:
        return float(v @ self.matrix @ v)


@dataclass(frozen=True)
class CoercivityCertificate:
    """Outcome of a coercivity check of a form on a cone.

    method is "exact" (face enumeration), "sampled" (projected power iterations,
    never certifying) or "vacuous" (the cone is {0}).
    """

    certified: bool
    c0: float
    method: str
    counterexample: Optional[np.ndarray] = None
    faces_examined: int = 0
    refuted: bool = False
    notes: tuple[str, ...] = ()
    minimizer: Optional[np.ndarray] = None
    delta: Optional[float] = None
    sup_norm_ratio: Optional[float] = None  # Ω(v) / (|x|_inf² + |u|_2²) at the minimizer


# endregion

# region Control results


@dataclass(frozen=True)
class OcpResidual:
    """Residual ω = (ν, π, ρ, ξ, η) of the discrete OCP optimality system."""

    nu: np.ndarray
    pi: np.ndarray
    rho: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    norm: float
    budget_norm: float


@dataclass(frozen=True)
class MayerResidual:
    """Residual (π, ρ, ν, η, μ, ξ) of the discrete Mayer optimality system."""

    pi: np.ndarray
    rho: np.ndarray
    nu: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    xi: np.ndarray
    norm: float


@dataclass(frozen=True)
class TimeSets:
    """Index sets over mesh intervals.

    active[j] lists nodes where G_j is active, positive[j] where additionally
    λ_j > t_mul, positive_delta[j] where λ_j > δ, and low lists the nodes where some
    active multiplier lies in (t_mul, δ].
    """

    delta: float
    h: float
    active: tuple[tuple[int, ...], ...]
    positive: tuple[tuple[int, ...], ...]
    positive_delta: tuple[tuple[int, ...], ...]
    low: tuple[int, ...]

    @property
    def low_measure(self) -> float:
        return self.h * len(self.low)


@dataclass(frozen=True)
class LegendreResult:
    holds: bool
    c_l: float
    violating_node: Optional[int] = None
    violating_direction: Optional[np.ndarray] = None


@dataclass(frozen=True)
class HamiltonianGrowthResult:
    holds: bool
    c_h: float
    eps_h: float
    violating_node: Optional[int] = None
    violating_control: Optional[np.ndarray] = None
    status: str = "ok"  # "inconclusive" when some node admits no samples


@dataclass(frozen=True)
class RegularityResult:
    holds: bool
    worst_node: Optional[int]
    min_singular_value: float


@dataclass(frozen=True)
class ControlComponentReport:
    """Which control nodes the cone pins to zero and the measure of the rest."""

    pinned_nodes: tuple[int, ...]
    free_nodes: tuple[int, ...]
    free_measure: float
    trivial: bool


# endregion

# region Perturbation harness

NLP_BLOCKS = ("xi", "eta", "zeta")
OCP_BLOCKS = ("nu", "pi", "rho", "xi", "eta")
MAYER_BLOCKS = ("pi", "rho", "nu", "eta", "mu", "xi")


def blocks_for(kind: ProblemKind) -> tuple[str, ...]:
    return {"nlp": NLP_BLOCKS, "ocp": OCP_BLOCKS, "mayer": MAYER_BLOCKS}[kind]


@dataclass(frozen=True)
class Perturbation:
    """A perturbation of the optimality system, one array per named block."""

    kind: ProblemKind
    blocks: dict[str, np.ndarray]
    norm: float
    budget_norm: float = 0.0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]


@dataclass(frozen=True)
class PerturbationSpec:
    """Shapes, norm weights and enabled blocks used when sampling perturbations."""

    kind: ProblemKind
    shapes: dict[str, tuple[int, ...]]
    h: float = 1.0
    gram: Optional[np.ndarray] = None  # weak-norm Gram for the dual norm of ζ
    enabled: tuple[str, ...] = ()

    def __post_init__(self):
        unknown = set(self.enabled) - set(self.shapes)
        if unknown:
            raise ProblemInputError(f"Unknown perturbation blocks: {sorted(unknown)}")


@dataclass(frozen=True)
class PerturbedSolution:
    """One converged branch of a perturbed optimality system."""

    z: np.ndarray  # primal decision vector
    multipliers: dict[str, np.ndarray]
    active: frozenset[int]
    dist_weak: float
    dist_strong_primal: float
    dist_weak_primal: float
    iterations: int
    distances: dict[str, float] = field(default_factory=dict)  # per-variable block


@dataclass(frozen=True)
class KappaSample:
    level: int
    index: int
    magnitude: float
    norm: float
    budget_norm: float
    converged: bool
    ratio: float
    dist_weak: float
    dist_strong_primal: float
    dist_weak_primal: float
    branches: int
    block_norms: dict[str, float] = field(default_factory=dict)
    distances: dict[str, float] = field(default_factory=dict)  # per-variable, worst branch
    signature: str = ""  # active set of the worst branch


@dataclass(frozen=True)
class KappaEstimate:
    samples: tuple[KappaSample, ...]
    kappa_hat: float
    plateau_flag: bool
    radius_a: float
    level_max_ratios: tuple[float, ...]
    converged_fraction: float
    status: str  # "ok" | "inconclusive"
    bound_b: float = 0.0  # largest sampled perturbation norm


@dataclass(frozen=True)
class SmsrReport:
    problem_id: str
    kind: ProblemKind
    certificates: dict[str, bool]
    estimate: KappaEstimate
    violations: tuple[KappaSample, ...]
    distance_breakdown: dict[str, float]


@dataclass(frozen=True)
class CounterexampleRow:
    s: int
    j_value: float
    closed_form: float
    rel_error: float
    sup_distance: float


@dataclass(frozen=True)
class CounterexampleReport:
    rows: tuple[CounterexampleRow, ...]
    mesh: Mesh
    reference_cost: float
    control_component: ControlComponentReport
    multiplier_deviation: float


# endregion

# region Reports


@dataclass
class CheckResult:
    """Outcome of one named check and the key-value entries it reports.

    Non-gating checks are reported but never change the exit code.
    """

    name: str
    status: str
    entries: dict[str, Any] = field(default_factory=dict)
    gating: bool = True
    message: str = ""

    @property
    def value(self) -> Any:
        """Headline value for the flat CSV mirror: the first entry, if any."""
        return next(iter(self.entries.values()), "")


@dataclass(frozen=True)
class ReportTable:
    title: str
    headers: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]
    alignments: Optional[tuple[str, ...]] = None


@dataclass
class Report:
    """Everything one CLI command emits: config echo, checks, tables and warnings."""

    command: str
    problem_id: str
    kind: str
    version: str
    config: dict[str, Any]
    checks: list[CheckResult] = field(default_factory=list)
    tables: list[ReportTable] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    exit_code: int = 0
    summary: dict[str, Any] = field(default_factory=dict)


# endregion
