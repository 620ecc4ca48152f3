"""
Loading problems from the built-in registry and from problem files.

Registry entries come from SubregConfig.problem_registry and take one of two forms:

    {"file": "lq_bound.txt", "radius_a": 0.3}           # file under data/problems
    {"module": "pkg.mod", "factory": "build_problem"}   # callable returning a ProblemFile

Control-problem references are completed from (x0, u): states by forward Euler,
adjoint and multipliers by the discrete optimality system.
"""

import importlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from subreg_kit.config import SubregConfig
from subreg_kit.parsers.problem_parser import ProblemFile, parse_problem_file
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data.models import (
    ControlTuple,
    NlpProblem,
    NlpTuple,
    OcpProblem,
    Problem,
)
from subreg_kit.utils.services.mayer_service import MayerService
from subreg_kit.utils.services.ocp_service import OcpService
from subreg_kit.utils.services.transcription_service import TranscriptionService

logger = get_logger(__name__)

PROBLEMS_DIR = Path(__file__).resolve().parents[2] / "data" / "problems"

Reference = Union[NlpTuple, ControlTuple]


@dataclass(frozen=True)
class RegisteredProblem:
    """A problem with its completed reference tuple."""

    problem_id: str
    problem: Problem
    reference: Reference
    radius_a: Optional[float] = None
    description: str = ""

    @property
    def kind(self) -> str:
        return self.problem.kind


def _description(path: Path) -> str:
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            return line.lstrip("# ").strip()
    return ""


def _constant_controls(value: Optional[np.ndarray], n_intervals: int, m: int) -> np.ndarray:
    if value is None:
        return np.zeros((n_intervals, m))
    value = np.asarray(value, dtype=float).reshape(-1)
    if value.size != m:
        raise ProblemInputError(f"Solution block gives {value.size} controls, expected {m}")
    return np.tile(value, (n_intervals, 1))


def complete_reference(
    problem_file: ProblemFile, config: SubregConfig, mesh_n: Optional[int] = None
) -> Reference:
    """Reference tuple from the solution block of a problem file.

    NLP multipliers missing from the block default to zero. Control problems are
    discretized with `mesh_n` intervals (config.mesh_n when None).

    Raises:
        ProblemInputError: If the solution block is missing or has wrong sizes.
    """
    problem, solution = problem_file.problem, problem_file.solution
    if isinstance(problem, NlpProblem):
        if "x" not in solution:
            raise ProblemInputError(f"{problem_file.name}: solution block needs 'x'")
        return NlpTuple.of(
            solution["x"],
            solution.get("lambda", np.zeros(problem.m)),
            solution.get("y", np.zeros(problem.k)),
        )

    if "x0" not in solution:
        raise ProblemInputError(f"{problem_file.name}: solution block needs 'x0'")
    mesh = TranscriptionService.mesh_for(problem, mesh_n or config.mesh_n)
    x0 = np.asarray(solution["x0"], dtype=float).reshape(-1)
    if x0.size != problem.n:
        raise ProblemInputError(f"x0 has {x0.size} entries, expected {problem.n}")
    u = _constant_controls(solution.get("u"), mesh.n_intervals, problem.m)
    if isinstance(problem, OcpProblem):
        return OcpService.complete_tuple(problem, x0, u, mesh, config)
    return MayerService.complete_tuple(problem, x0, u, mesh, config)


def load_problem_file(
    path: Union[str, Path], config: SubregConfig, mesh_n: Optional[int] = None
) -> RegisteredProblem:
    """Parse a problem file and complete its reference tuple."""
    path = Path(path)
    problem_file = parse_problem_file(path, config)
    reference = complete_reference(problem_file, config, mesh_n)
    return RegisteredProblem(
        problem_file.name, problem_file.problem, reference, None, _description(path)
    )


def _load_entry(
    problem_id: str, details: dict[str, Any], config: SubregConfig, mesh_n: Optional[int]
) -> RegisteredProblem:
    radius = details.get("radius_a")
    if "file" in details:
        path = Path(details["file"])
        if not path.is_absolute():
            path = PROBLEMS_DIR / path
        loaded = load_problem_file(path, config, mesh_n)
        return RegisteredProblem(
            problem_id, loaded.problem, loaded.reference, radius, loaded.description
        )

    module = importlib.import_module(details["module"])
    factory = getattr(module, details["factory"])
    problem_file = factory()
    reference = complete_reference(problem_file, config, mesh_n)
    return RegisteredProblem(
        problem_id, problem_file.problem, reference, radius, details.get("description", "")
    )


def registry_ids(config: SubregConfig) -> list[str]:
    return sorted(config.problem_registry)


def load_registry_problem(
    problem_id: str, config: SubregConfig, mesh_n: Optional[int] = None
) -> RegisteredProblem:
    """Load one registry problem.

    Raises:
        ProblemInputError: If the id is unknown or its entry cannot be loaded.
    """
    details = config.problem_registry.get(problem_id)
    if details is None:
        raise ProblemInputError(
            f"Unknown registry problem '{problem_id}'. "
            f"Available: {', '.join(registry_ids(config))}"
        )
    try:
        return _load_entry(problem_id, details, config, mesh_n)
    except (KeyError, ImportError, AttributeError, OSError) as e:
        raise ProblemInputError(f"Failed to load registry problem '{problem_id}': {e}") from e


def load_registry(
    config: SubregConfig, mesh_n: Optional[int] = None
) -> dict[str, RegisteredProblem]:
    """Load every registry entry; entries that fail are logged and skipped."""
    registry = {}
    for problem_id in registry_ids(config):
        try:
            registry[problem_id] = load_registry_problem(problem_id, config, mesh_n)
        except (ProblemInputError, ValueError) as e:
            logger.error(f"Failed to load registry problem '{problem_id}': {e}", exc_info=True)
            continue
    return registry
