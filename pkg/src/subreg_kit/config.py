"""
Configuration for subreg-kit analyses.

SubregConfig carries every tolerance, discretization and harness setting; RunConfig
wraps it with the command-level choices echoed into each report.
"""

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from subreg_kit.utils.data import constants as C


def _default_registry() -> dict[str, dict[str, Any]]:
    return {
        "nlp_scalar_quadratic": {"file": "nlp_scalar_quadratic.txt"},
        "nlp_eq_quadratic": {"file": "nlp_eq_quadratic.txt"},
        "nlp_scalar_quartic": {"file": "nlp_scalar_quartic.txt", "radius_a": 0.5},
        "nlp_diag_quadratic": {"file": "nlp_diag_quadratic.txt"},
        "nlp_active_bound": {"file": "nlp_active_bound.txt"},
        "mayer_terminal_eq": {"file": "mayer_terminal_eq.txt"},
        "lq_bound": {"file": "lq_bound.txt"},
        "example1": {"file": "example1.txt"},
    }


def _default_output_dir() -> str:
    return os.environ.get(C.OUTPUT_DIR_ENV, C.DEFAULT_OUTPUT_DIR)


@dataclass
class SubregConfig:
    """
    Settings for every subreg-kit operation.

    Services accept a SubregConfig explicitly or fall back to the one registered with
    set_config(). All fields have defaults, so SubregConfig() is a valid configuration.

    Example:
        config = SubregConfig(mesh_n=400, seed=7, delta_sweep=(0.1, 0.01))
    """

    # ============================================================================
    # Output
    # ============================================================================

    output_dir: str = field(default_factory=_default_output_dir)

    # ============================================================================
    # Logging Configuration
    # ============================================================================

    logging_level: str = "WARNING"
    logging_format: str = "text"
    logging_log_dir: str = ""  # empty disables log files
    logging_max_log_size_mb: int = 10
    logging_backup_count: int = 5
    logging_console_colors: bool = True
    logging_clear_on_run: bool = False

    # ============================================================================
    # Tolerances
    # ============================================================================

    tol_act: float = C.TOL_ACT
    tol_mul: float = C.TOL_MUL
    tol_rank: float = C.TOL_RANK
    tol_pd: float = C.TOL_PD
    tol_residual: float = C.TOL_RESIDUAL
    tol_newton: float = C.TOL_NEWTON

    # ============================================================================
    # Discretization
    # ============================================================================

    mesh_n: int = C.MESH_N
    counterexample_mesh_n: int = C.COUNTEREXAMPLE_MESH_N
    delta_sweep: tuple[float, ...] = C.DELTA_SWEEP

    # ============================================================================
    # Coercivity Certificates
    # ============================================================================

    d_max: int = C.D_MAX
    row_cap: int = C.ROW_CAP
    sampled_restarts: int = C.SAMPLED_RESTARTS

    # ============================================================================
    # Perturbation Harness
    # ============================================================================

    seed: int = 0
    magnitudes: tuple[float, ...] = C.MAGNITUDES
    samples_per_magnitude: int = C.SAMPLES_PER_MAGNITUDE
    radius_a: Optional[float] = None  # None -> 0.1 * (1 + |reference|_inf)
    blocks: Optional[tuple[str, ...]] = None  # None -> every perturbation block
    flip_margin: float = C.FLIP_MARGIN
    flip_budget: int = C.FLIP_BUDGET
    workers: int = 4

    # ============================================================================
    # Growth Probes
    # ============================================================================

    growth_samples: int = C.GROWTH_SAMPLES
    growth_radius: float = C.GROWTH_RADIUS

    # ============================================================================
    # Problem Registry
    # ============================================================================

    problem_registry: dict[str, dict[str, Any]] = field(default_factory=_default_registry)

    def __post_init__(self):
        """Normalize sequence fields and validate configuration.

        Raises:
            ValueError: If configuration values are invalid
            TypeError: If configuration types are incorrect
        """
        self.delta_sweep = tuple(float(d) for d in self.delta_sweep)
        self.magnitudes = tuple(float(m) for m in self.magnitudes)
        if self.blocks is not None:
            self.blocks = tuple(self.blocks)
        self._validate_configuration()

    def _validate_configuration(self) -> None:
        """Validate configuration values and ranges.

        Raises:
            ValueError: If configuration values are invalid
            TypeError: If configuration types are incorrect
        """
        valid_log_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if self.logging_level.upper() not in valid_log_levels:
            raise ValueError(
                f"logging_level must be one of {valid_log_levels}, got '{self.logging_level}'"
            )

        valid_log_formats = ["text", "json"]
        if self.logging_format not in valid_log_formats:
            raise ValueError(
                f"logging_format must be one of {valid_log_formats}, got '{self.logging_format}'"
            )

        if self.logging_max_log_size_mb <= 0:
            raise ValueError(
                f"logging_max_log_size_mb must be positive, got {self.logging_max_log_size_mb}"
            )

        if self.logging_backup_count < 0:
            raise ValueError(
                f"logging_backup_count must be non-negative, got {self.logging_backup_count}"
            )

        for name in ("tol_act", "tol_mul", "tol_rank", "tol_pd", "tol_residual", "tol_newton"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or value <= 0:
                raise ValueError(f"{name} must be a positive number, got {value!r}")

        for name in ("mesh_n", "counterexample_mesh_n", "d_max", "row_cap", "sampled_restarts",
                     "samples_per_magnitude", "growth_samples", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise TypeError(f"{name} must be an int, got {type(value).__name__}")
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")

        for name in ("mesh_n", "counterexample_mesh_n"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2, got {getattr(self, name)}")

        if self.flip_budget < 0:
            raise ValueError(f"flip_budget must be non-negative, got {self.flip_budget}")

        if not self.delta_sweep or any(d <= 0 for d in self.delta_sweep):
            raise ValueError(f"delta_sweep must hold positive values, got {self.delta_sweep}")

        if not self.magnitudes or any(m <= 0 for m in self.magnitudes):
            raise ValueError(f"magnitudes must hold positive values, got {self.magnitudes}")

        if self.radius_a is not None and self.radius_a <= 0:
            raise ValueError(f"radius_a must be positive, got {self.radius_a}")

        if self.growth_radius <= 0:
            raise ValueError(f"growth_radius must be positive, got {self.growth_radius}")

        if not isinstance(self.problem_registry, dict):
            raise TypeError(
                f"problem_registry must be a dict, got {type(self.problem_registry).__name__}"
            )

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def echo(self) -> dict[str, Any]:
        """Settings that influence results, in a stable order for report headers."""
        data = asdict(self)
        for key in ("problem_registry", "output_dir", "workers") + tuple(
            k for k in data if k.startswith("logging_")
        ):
            data.pop(key, None)
        return dict(sorted(data.items()))


@dataclass
class RunConfig:
    """A single CLI invocation: command, problem source, output format and settings."""

    command: str
    problem_path: Optional[str] = None
    registry_id: Optional[str] = None
    output_format: str = "text"
    settings: SubregConfig = field(default_factory=SubregConfig)
    s_values: tuple[int, ...] = C.COUNTEREXAMPLE_S_VALUES

    def __post_init__(self):
        if self.command not in ("analyze", "certify", "perturb", "counterexample"):
            raise ValueError(f"Unknown command '{self.command}'")
        if self.output_format not in ("text", "csv"):
            raise ValueError(f"output_format must be 'text' or 'csv', got '{self.output_format}'")
        if self.command != "counterexample" and bool(self.problem_path) == bool(self.registry_id):
            raise ValueError("Exactly one of problem_path or registry_id must be given")

    @property
    def source_label(self) -> str:
        if self.registry_id:
            return self.registry_id
        if self.problem_path:
            return Path(self.problem_path).stem
        return "example1"
