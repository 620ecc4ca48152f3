import dataclasses

import numpy as np
import pytest

from subreg_kit.parsers.problem_parser import parse_problem_text
from subreg_kit.utils.core.errors import EmptyNormalConeError, ProblemInputError
from subreg_kit.utils.data.models import Mesh
from subreg_kit.utils.services.ocp_service import OcpService

GROWTH = """\
class: ocp
dims: 1, 1
dynamics:
  x1
endpoint:
  q2
"""


def family_member(rng):
    """Clock plus one controlled state, bang-bang outside a linear interior arc."""
    kappa = rng.uniform(2.0, 6.0)
    tau = rng.uniform(0.3, 0.7)
    gamma = rng.uniform(0.3, 1.0)
    beta = rng.uniform(0.1, 1.0)
    text = (
        "class: ocp\ndims: 2, 1, 2\ndynamics:\n  1\n"
        f"  {kappa!r} * x1 * u1 - {kappa * tau!r} * u1 + {gamma!r} * u1^2"
        f" + {beta!r} * x2\n"
        "endpoint:\n  q4 + 0.5 * q1^2 + 0.5 * q2^2\n"
        "control_ineq:\n  u1 - 1\n  -u1 - 1\n"
    )
    problem = parse_problem_text(text).problem
    mesh = Mesh(8)
    u = np.clip(-kappa * (mesh.left_nodes - tau) / (2.0 * gamma), -1.0, 1.0)
    return problem, mesh, u[:, None]


class TestRecursions:
    def test_unit_control_reaches_one(self, registry):
        problem = registry("lq_bound").problem
        mesh = Mesh(10)
        x = OcpService.propagate_state(problem, np.zeros(1), np.ones((10, 1)), mesh)
        assert x.shape == (11, 1)
        assert x[-1, 0] == pytest.approx(1.0)

    def test_euler_growth_approaches_e(self):
        problem = parse_problem_text(GROWTH).problem
        x = OcpService.propagate_state(problem, np.ones(1), np.zeros((1000, 1)), Mesh(1000))
        assert x[-1, 0] == pytest.approx(np.e, rel=2e-3)

    def test_zero_control_freezes_the_cost_state(self, registry):
        problem = registry("example1").problem
        mesh = Mesh(40)
        x = OcpService.propagate_state(problem, np.zeros(2), np.zeros((40, 1)), mesh)
        np.testing.assert_allclose(x[:, 0], mesh.nodes)
        np.testing.assert_allclose(x[:, 1], 0.0)

    def test_control_shape_is_checked(self, registry):
        problem = registry("lq_bound").problem
        with pytest.raises(ProblemInputError):
            OcpService.propagate_state(problem, np.zeros(1), np.ones((9, 1)), Mesh(10))

    def test_example1_adjoint_and_multipliers(self, registry):
        entry = registry("example1")
        reference = entry.reference
        np.testing.assert_allclose(reference.p, np.tile([0.0, 1.0], (41, 1)), atol=1e-12)
        np.testing.assert_allclose(reference.lam[:, 0], reference.mesh.left_nodes, atol=1e-12)

    def test_transversality_defect(self, registry):
        problem = registry("lq_bound").problem
        mesh = Mesh(20)
        u = -np.ones((20, 1))
        for x0, expected in ((-1.0, 0.0), (-0.5, 0.5)):
            x = OcpService.propagate_state(problem, np.array([x0]), u, mesh)
            gradient = np.array([x0, 1.0])
            adjoint = OcpService.solve_adjoint(problem, x, u, mesh, gradient)
            np.testing.assert_allclose(adjoint.p, 1.0)
            assert adjoint.transversality_defect == pytest.approx(expected)

    def test_multiplier_recovery_on_the_lower_bound(self, registry, config):
        problem = registry("lq_bound").problem
        mesh = Mesh(20)
        u = -np.ones((20, 1))
        x = OcpService.propagate_state(problem, np.array([-1.0]), u, mesh)
        path = OcpService.multiplier_from_stationarity(
            problem, x, u, np.ones((21, 1)), mesh, config
        )
        np.testing.assert_allclose(path.lam[:, 0], 0.0)
        np.testing.assert_allclose(path.lam[:, 1], 1.0)
        assert path.max_residual == pytest.approx(0.0, abs=1e-12)
        assert path.min_component == pytest.approx(0.0)


class TestResiduals:
    def test_reference_is_stationary(self, registry, config):
        entry = registry("lq_bound")
        residual = OcpService.optimality_residuals_ocp(entry.problem, entry.reference, config)
        assert residual.norm <= 1e-8
        assert residual.budget_norm <= 1e-8

    def test_shifted_adjoint(self, registry, config):
        entry = registry("lq_bound")
        point = dataclasses.replace(entry.reference, p=entry.reference.p + 1e-3)
        residual = OcpService.optimality_residuals_ocp(entry.problem, point, config)
        np.testing.assert_allclose(residual.nu, [1e-3, -1e-3], atol=1e-12)
        np.testing.assert_allclose(residual.rho, 1e-3, atol=1e-12)
        np.testing.assert_allclose(residual.pi, 0.0, atol=1e-12)
        assert residual.norm == pytest.approx(np.sqrt(2.0) * 1e-3 + 1e-3)

    def test_negative_multiplier(self, registry, config):
        entry = registry("lq_bound")
        lam = entry.reference.lam.copy()
        lam[3, 0] = -0.5
        point = dataclasses.replace(entry.reference, lam=lam)
        with pytest.raises(EmptyNormalConeError):
            OcpService.optimality_residuals_ocp(entry.problem, point, config)

    def test_example1_time_sets(self, registry, config):
        entry = registry("example1")
        reference = entry.reference
        sets = OcpService.time_sets(
            entry.problem, reference.u, reference.lam, reference.mesh, 0.5, config
        )
        assert sets.active == (tuple(range(40)),)
        assert sets.positive == (tuple(range(1, 40)),)
        assert sets.positive_delta == (tuple(range(21, 40)),)
        assert sets.low == tuple(range(1, 21))


class TestConesAndForms:
    def test_lq_bound_cone_pins_every_control(self, registry, config):
        entry = registry("lq_bound")
        cone = OcpService.discrete_critical_cone_ocp(entry.problem, entry.reference, config=config)
        report = OcpService.control_component_report(cone, 1, 1, entry.reference.mesh, config)
        assert report.free_nodes == ()
        assert report.trivial
        v = np.zeros(41)
        v[0] = 1.0
        assert cone.contains(v)
        v[5] = 0.1
        assert not cone.contains(v)

    def test_lq_bound_is_coercive_on_every_cone(self, registry, config):
        entry = registry("lq_bound")
        certificate = OcpService.certify_coercivity_ocp(
            entry.problem, entry.reference, None, config
        )
        assert certificate.certified
        assert certificate.c0 == pytest.approx(1.0)
        for delta in (0.1, 0.05):
            extended = OcpService.certify_coercivity_ocp(
                entry.problem, entry.reference, delta, config
            )
            assert extended.certified
            assert extended.delta == delta
            assert extended.c0 == pytest.approx(1.0)

    def test_example1_control_component_is_trivial(self, registry, config):
        entry = registry("example1")
        cone = OcpService.discrete_critical_cone_ocp(entry.problem, entry.reference, config=config)
        report = OcpService.control_component_report(cone, 2, 1, entry.reference.mesh, config)
        assert report.free_nodes == (0,)
        assert report.pinned_nodes == tuple(range(1, 40))
        assert report.free_measure == pytest.approx(1.0 / 40)
        assert report.trivial

    def test_example1_is_not_coercive_on_k(self, registry, config):
        entry = registry("example1")
        certificate = OcpService.certify_coercivity_ocp(
            entry.problem, entry.reference, None, config
        )
        assert not certificate.certified
        assert certificate.refuted

    def test_example1_quadratic_form_gram(self, registry):
        entry = registry("example1")
        form = OcpService.quadratic_form_ocp(entry.problem, entry.reference)
        np.testing.assert_allclose(np.diag(form.weak_norm_gram)[:2], 1.0)
        np.testing.assert_allclose(np.diag(form.weak_norm_gram)[2:], 1.0 / 40)

    def test_hamiltonian_representation_rejects_delta(self, registry, config):
        entry = registry("example1")
        with pytest.raises(ValueError):
            OcpService.discrete_critical_cone_ocp(
                entry.problem, entry.reference, 0.1, "hamiltonian", config
            )

    def test_endpoint_derivative_vanishes_on_k(self, registry, config):
        entry = registry("lq_bound")
        cone = OcpService.discrete_critical_cone_ocp(entry.problem, entry.reference, config=config)
        value = OcpService.endpoint_derivative_on_cone(
            entry.problem, entry.reference, cone, config=config
        )
        assert value == pytest.approx(0.0, abs=1e-10)


class TestPointwiseConditions:
    def test_example1_legendre_fails(self, registry, config):
        entry = registry("example1")
        result = OcpService.check_legendre(entry.problem, entry.reference, 0.5, config)
        assert not result.holds
        assert result.c_l == pytest.approx(-2.0)
        assert result.violating_node in range(1, 21)

    def test_example1_hamiltonian_growth_fails_early(self, registry, config):
        entry = registry("example1")
        result = OcpService.check_hamiltonian_growth(
            entry.problem, entry.reference, 0.5, config=config
        )
        assert not result.holds
        assert result.c_h < 0.0
        assert result.violating_node <= 3

    def test_conditions_hold_without_low_nodes(self, registry, config):
        entry = registry("lq_bound")
        assert OcpService.check_legendre(entry.problem, entry.reference, 0.1, config).holds
        growth = OcpService.check_hamiltonian_growth(
            entry.problem, entry.reference, 0.1, config=config
        )
        assert growth.holds

    def test_control_regularity(self, registry, config):
        entry = registry("lq_bound")
        result = OcpService.check_control_regularity(
            entry.problem, entry.reference.u, entry.reference.mesh, config
        )
        assert result.holds
        assert result.min_singular_value == pytest.approx(1.0)


def test_lq_bound_growth_probe(registry, config):
    entry = registry("lq_bound")
    result = OcpService.growth_probe_control(entry.problem, entry.reference, config=config)
    assert result.violations == ()
    assert result.n_samples == config.growth_samples
    assert result.fitted_c >= 0.25


@pytest.mark.parametrize("trial", range(20))
class TestRandomFamily:
    def test_cones_are_nested(self, trial, config):
        rng = np.random.default_rng(trial)
        problem, mesh, u = family_member(rng)
        point = OcpService.complete_tuple(problem, np.zeros(2), u, mesh, config)
        d1, d2 = sorted(rng.uniform(0.01, 0.5, size=2))
        cones = [
            OcpService.discrete_critical_cone_ocp(problem, point, delta, config=config)
            for delta in (None, d1, d2)
        ]
        for inner, outer in zip(cones, cones[1:]):
            for _ in range(20):
                v = inner.project(rng.normal(size=inner.dim))
                assert outer.contains(v, tol=1e-7)

    def test_cone_representations_agree(self, trial, config):
        rng = np.random.default_rng(100 + trial)
        problem, mesh, u = family_member(rng)
        point = OcpService.complete_tuple(problem, np.zeros(2), u, mesh, config)
        by_multiplier = OcpService.discrete_critical_cone_ocp(problem, point, config=config)
        by_hamiltonian = OcpService.discrete_critical_cone_ocp(
            problem, point, representation="hamiltonian", config=config
        )
        for _ in range(20):
            v = rng.normal(size=by_multiplier.dim)
            np.testing.assert_allclose(
                by_multiplier.project(v), by_hamiltonian.project(v), atol=1e-7
            )

    def test_larger_cones_have_smaller_constants(self, trial, config):
        rng = np.random.default_rng(200 + trial)
        problem, mesh, u = family_member(rng)
        point = OcpService.complete_tuple(problem, np.zeros(2), u, mesh, config)
        exact = OcpService.certify_coercivity_ocp(problem, point, None, config)
        extended = OcpService.certify_coercivity_ocp(problem, point, 0.2, config)
        assert exact.method == extended.method == "exact"
        assert extended.c0 <= exact.c0 + 1e-9
        if extended.certified:
            assert exact.certified
        legendre = OcpService.check_legendre(problem, point, 0.2, config)
        if legendre.holds:
            growth = OcpService.check_hamiltonian_growth(problem, point, 0.2, config=config)
            assert growth.holds
