import numpy as np
import pytest

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.models import Mesh
from subreg_kit.utils.services.counterexample_service import CounterexampleService


def test_closed_form():
    assert CounterexampleService.closed_form(1) == -0.5
    assert CounterexampleService.closed_form(2) == -1.0 / 16


def test_competitor_controls():
    u = CounterexampleService.competitor_controls(4, Mesh(8))
    np.testing.assert_allclose(u[:, 0], [0.25, 0.25, 0, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("s", [0, 3])
def test_competitor_needs_a_compatible_mesh(s):
    with pytest.raises(ProblemInputError):
        CounterexampleService.competitor_controls(s, Mesh(10))


def test_example1_costs_match_the_closed_form(registry, config):
    entry = registry("example1", mesh_n=1000)
    report = CounterexampleService.example1_counterexample(
        entry.problem, entry.reference, (1, 2, 4), config
    )
    assert [row.s for row in report.rows] == [1, 2, 4]
    for row in report.rows:
        assert row.j_value < 0.0
        assert row.rel_error <= 0.02
        assert row.sup_distance == pytest.approx(1.0 / row.s)
    assert report.reference_cost == pytest.approx(0.0)
    assert report.control_component.trivial
    assert report.multiplier_deviation <= 1e-10
