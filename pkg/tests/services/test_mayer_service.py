import dataclasses

import numpy as np
import pytest

from subreg_kit.parsers.problem_parser import parse_problem_text
from subreg_kit.utils.core.errors import EmptyNormalConeError, PreconditionError
from subreg_kit.utils.data.models import EndpointMultipliers, Mesh
from subreg_kit.utils.services.mayer_service import MayerService
from subreg_kit.utils.services.ocp_service import OcpService

DUPLICATED = """\
class: mayer
dims: 2, 1
dynamics:
  u1
  u1^2
endpoint:
  q4
eq:
  q1
  q2
  q3 - 1
  q3 - 1
"""

BOUNDED = """\
class: mayer
dims: 1, 1
dynamics:
  u1
endpoint:
  q2
eq:
  q1
ineq:
  -q2 - 1
"""


def test_reference_multipliers(registry, config):
    reference = registry("mayer_terminal_eq").reference
    assert reference.endpoint.alpha0 == 1.0
    np.testing.assert_allclose(reference.endpoint.beta, [2.0, -1.0, -2.0], atol=1e-9)
    np.testing.assert_allclose(reference.p, np.tile([-2.0, 1.0], (41, 1)), atol=1e-9)


def test_reference_is_stationary(registry, config):
    entry = registry("mayer_terminal_eq")
    residual = MayerService.mayer_stationarity(entry.problem, entry.reference, config)
    assert residual.norm <= 1e-8


def test_terminal_violation_shows_in_mu(registry, config):
    problem = registry("mayer_terminal_eq").problem
    mesh = Mesh(40)
    point = MayerService.complete_tuple(problem, np.zeros(2), np.full((40, 1), 1.3), mesh, config)
    residual = MayerService.mayer_stationarity(problem, point, config)
    np.testing.assert_allclose(residual.mu, [0.0, 0.0, 0.3], atol=1e-12)
    np.testing.assert_allclose(point.endpoint.beta[2], -2.6, atol=1e-9)
    assert residual.norm == pytest.approx(0.3, abs=1e-8)


def test_missing_endpoint_multipliers(registry, config):
    entry = registry("mayer_terminal_eq")
    point = dataclasses.replace(entry.reference, endpoint=None)
    with pytest.raises(PreconditionError):
        MayerService.mayer_stationarity(entry.problem, point, config)


def test_negative_alpha0(registry, config):
    entry = registry("mayer_terminal_eq")
    endpoint = EndpointMultipliers(-1.0, np.zeros(0), entry.reference.endpoint.beta)
    point = dataclasses.replace(entry.reference, endpoint=endpoint)
    with pytest.raises(EmptyNormalConeError):
        MayerService.mayer_stationarity(entry.problem, point, config)


def test_strict_mf_holds_for_independent_equalities(registry, config):
    entry = registry("mayer_terminal_eq")
    result = MayerService.check_strict_mf_mayer(entry.problem, entry.reference, config)
    assert result.holds
    assert result.witness is None
    assert result.reason == "homogeneous endpoint system is trivial"


def test_strict_mf_fails_for_duplicated_equality(config):
    problem = parse_problem_text(DUPLICATED).problem
    mesh = Mesh(20)
    point = MayerService.complete_tuple(problem, np.zeros(2), np.ones((20, 1)), mesh, config)
    result = MayerService.check_strict_mf_mayer(problem, point, config)
    assert not result.holds
    w = result.witness / np.max(np.abs(result.witness))
    np.testing.assert_allclose(w[:2], 0.0, atol=1e-8)
    assert w[2] == pytest.approx(-w[3])


def test_active_endpoint_inequality_gets_a_multiplier(config):
    problem = parse_problem_text(BOUNDED).problem
    mesh = Mesh(10)
    point = MayerService.complete_tuple(problem, np.zeros(1), -np.ones((10, 1)), mesh, config)
    # x(1) = -1 sits on the bound; stationarity asks for alpha = 1
    np.testing.assert_allclose(point.endpoint.alpha, [1.0], atol=1e-9)
    assert MayerService.mayer_stationarity(problem, point, config).norm <= 1e-8


def test_violated_endpoint_inequality(config):
    problem = parse_problem_text(BOUNDED).problem
    mesh = Mesh(10)
    with pytest.raises(PreconditionError, match="violated"):
        MayerService.complete_tuple(problem, np.zeros(1), -2.0 * np.ones((10, 1)), mesh, config)


def test_critical_cone_fixes_the_endpoints(registry, config):
    entry = registry("mayer_terminal_eq")
    cone = MayerService.mayer_critical_cone(entry.problem, entry.reference, config)
    v = np.zeros(cone.dim)
    v[2], v[3] = 1.0, -1.0
    assert cone.contains(v)
    v[3] = 1.0
    assert not cone.contains(v)


def test_coercivity_constant(registry, config):
    entry = registry("mayer_terminal_eq")
    certificate = MayerService.certify_coercivity_mayer(entry.problem, entry.reference, config)
    assert certificate.certified
    assert certificate.method == "exact"
    assert certificate.c0 == pytest.approx(2.0)


def test_growth_probe_after_retraction(registry, config):
    entry = registry("mayer_terminal_eq")
    result = OcpService.growth_probe_control(
        entry.problem, entry.reference, samples=100, config=config
    )
    assert result.n_retraction_failures == 0
    assert result.violations == ()
    assert result.fitted_c > 0.0
