import numpy as np
import pytest

from subreg_kit.config import SubregConfig
from subreg_kit.parsers.problem_parser import parse_problem_text
from subreg_kit.utils.core.config_registry import clear_config
from subreg_kit.utils.core.registry import complete_reference, load_registry_problem


@pytest.fixture(autouse=True)
def reset_config():
    yield
    clear_config()


@pytest.fixture
def config(tmp_path):
    """Small, fast settings writing into a temporary directory."""
    return SubregConfig(
        output_dir=str(tmp_path),
        mesh_n=40,
        samples_per_magnitude=6,
        magnitudes=(1e-2, 5e-3, 2.5e-3),
        growth_samples=200,
        workers=1,
    )


@pytest.fixture
def registry(config):
    def load(problem_id, mesh_n=None):
        return load_registry_problem(problem_id, config, mesh_n)

    return load


@pytest.fixture
def problem_from_text(config):
    """Parse problem-file text and complete its reference tuple."""

    def build(text, mesh_n=None):
        problem_file = parse_problem_text(text, "<test>", config)
        return problem_file.problem, complete_reference(problem_file, config, mesh_n)

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
