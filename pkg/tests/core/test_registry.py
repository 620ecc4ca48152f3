import numpy as np
import pytest

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.registry import (
    PROBLEMS_DIR,
    load_problem_file,
    load_registry,
    load_registry_problem,
    registry_ids,
)


def test_registry_ids(config):
    ids = registry_ids(config)
    assert ids == sorted(ids)
    assert {"example1", "lq_bound", "mayer_terminal_eq", "nlp_eq_quadratic"} <= set(ids)


def test_unknown_id(config):
    with pytest.raises(ProblemInputError, match="Available"):
        load_registry_problem("nope", config)


def test_entry_carries_radius_and_description(config):
    entry = load_registry_problem("nlp_scalar_quartic", config)
    assert entry.radius_a == 0.5
    assert entry.kind == "nlp"
    assert "x^4" in entry.description


def test_mesh_override(config):
    entry = load_registry_problem("lq_bound", config, mesh_n=12)
    assert entry.reference.mesh.n_intervals == 12
    assert entry.reference.u.shape == (12, 1)
    np.testing.assert_allclose(entry.reference.u, -1.0)


def test_missing_registry_file(config):
    config.problem_registry = {"ghost": {"file": "ghost.txt"}}
    with pytest.raises(ProblemInputError, match="ghost"):
        load_registry_problem("ghost", config)


def test_factory_entry(config):
    config.problem_registry = {
        "from_factory": {
            "module": "subreg_kit.parsers.problem_parser",
            "factory": "missing_factory",
        }
    }
    with pytest.raises(ProblemInputError):
        load_registry_problem("from_factory", config)


def test_load_registry_skips_broken_entries(config):
    config.problem_registry = {
        "lq_bound": {"file": "lq_bound.txt"},
        "ghost": {"file": "ghost.txt"},
    }
    loaded = load_registry(config, mesh_n=10)
    assert list(loaded) == ["lq_bound"]


def test_problem_file_without_solution(config, tmp_path):
    path = tmp_path / "bare.txt"
    path.write_text("class: nlp\ndims: 1\nobjective:\n  x1^2\n", encoding="utf-8")
    with pytest.raises(ProblemInputError, match="solution"):
        load_problem_file(path, config)


def test_problem_file_uses_stem_as_id(config):
    entry = load_problem_file(PROBLEMS_DIR / "nlp_eq_quadratic.txt", config)
    assert entry.problem_id == "nlp_eq_quadratic"
    assert entry.radius_a is None
