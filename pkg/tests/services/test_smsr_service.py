import dataclasses

import numpy as np
import pytest

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.services.smsr_service import SmsrService


class TestPerturbations:
    @pytest.mark.parametrize("problem_id", ["nlp_eq_quadratic", "lq_bound", "mayer_terminal_eq"])
    def test_norm_equals_magnitude(self, registry, config, problem_id):
        entry = registry(problem_id, mesh_n=10)
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        for index in range(5):
            perturbation = SmsrService.sample_perturbation(spec, 3e-3, seed=7, index=index)
            assert perturbation.norm == pytest.approx(3e-3)
            assert perturbation.budget_norm > 0.0

    def test_direction_depends_on_seed_and_index_only(self, registry, config):
        entry = registry("lq_bound", mesh_n=10)
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        small = SmsrService.sample_perturbation(spec, 1e-3, seed=3, index=2)
        large = SmsrService.sample_perturbation(spec, 1e-2, seed=3, index=2)
        again = SmsrService.sample_perturbation(spec, 1e-3, seed=3, index=2)
        other = SmsrService.sample_perturbation(spec, 1e-3, seed=3, index=4)
        for name in spec.shapes:
            np.testing.assert_allclose(10.0 * small[name], large[name])
            np.testing.assert_array_equal(small[name], again[name])
        assert not np.allclose(small["rho"], other["rho"])

    def test_disabled_blocks_stay_zero(self, registry, config):
        config.blocks = ("zeta",)
        entry = registry("nlp_eq_quadratic")
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        perturbation = SmsrService.sample_perturbation(spec, 1e-2, seed=0)
        np.testing.assert_array_equal(perturbation["eta"], 0.0)
        assert np.linalg.norm(perturbation["zeta"]) == pytest.approx(1e-2)

    def test_zero_magnitude(self, registry, config):
        entry = registry("nlp_eq_quadratic")
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        assert SmsrService.sample_perturbation(spec, 0.0, seed=0).norm == 0.0

    def test_negative_magnitude(self, registry, config):
        entry = registry("nlp_eq_quadratic")
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        with pytest.raises(ProblemInputError):
            SmsrService.sample_perturbation(spec, -1e-3, seed=0)

    def test_ocp_block_shapes(self, registry, config):
        entry = registry("example1", mesh_n=10)
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        assert spec.shapes == {
            "nu": (4,),
            "pi": (10, 2),
            "rho": (10, 1),
            "xi": (10, 2),
            "eta": (10, 1),
        }
        assert spec.h == pytest.approx(0.1)


class TestPerturbedSolves:
    def test_tilted_quadratic(self, registry, config):
        entry = registry("nlp_scalar_quadratic")
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        perturbation = SmsrService.sample_perturbation(spec, 1e-2, seed=0)
        branches = SmsrService.solve_perturbed_kkt(
            entry.problem, perturbation, entry.reference, 0.1, config, np.random.default_rng(0)
        )
        assert len(branches) == 1
        assert branches[0].dist_weak == pytest.approx(1e-2)

    def test_solution_outside_radius_is_dropped(self, registry, config):
        entry = registry("nlp_scalar_quadratic")
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        perturbation = SmsrService.sample_perturbation(spec, 1e-2, seed=0)
        branches = SmsrService.solve_perturbed_kkt(
            entry.problem, perturbation, entry.reference, 1e-3, config, np.random.default_rng(0)
        )
        assert branches == []

    def test_perturbed_ocp_stays_close(self, registry, config):
        entry = registry("lq_bound", mesh_n=10)
        spec = SmsrService.perturbation_spec(entry.problem, entry.reference, config)
        perturbation = SmsrService.sample_perturbation(spec, 1e-3, seed=1)
        branches = SmsrService.solve_perturbed_ocp(
            entry.problem, perturbation, entry.reference, 0.5, config, np.random.default_rng(1)
        )
        assert branches
        for branch in branches:
            assert branch.dist_weak < 0.1
            assert set(branch.distances) == {"x", "u", "p", "lam"}


class TestKappa:
    def test_unit_quadratic_has_unit_kappa(self, registry, config):
        entry = registry("nlp_scalar_quadratic")
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config)
        assert estimate.status == "ok"
        assert estimate.converged_fraction == 1.0
        assert estimate.kappa_hat == pytest.approx(1.0, rel=1e-6)
        assert estimate.plateau_flag
        assert estimate.bound_b == pytest.approx(1e-2)

    def test_diagonal_quadratic_kappa_approaches_largest_inverse_eigenvalue(
        self, registry, config
    ):
        config.blocks = ("zeta",)
        config.magnitudes = (1e-2,)
        config.samples_per_magnitude = 256
        entry = registry("nlp_diag_quadratic")
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config)
        assert 0.99 <= estimate.kappa_hat <= 1.0 + 1e-6

    def test_quartic_has_no_plateau(self, registry, config):
        config = dataclasses.replace(
            config,
            magnitudes=tuple(1e-2 / 2**i for i in range(6)),
            samples_per_magnitude=2,
        )
        entry = registry("nlp_scalar_quartic")
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config, radius_a=0.5)
        ratios = estimate.level_max_ratios
        assert not estimate.plateau_flag
        assert ratios[-1] >= 4.0 * ratios[0]
        # |x| = |zeta|^(1/3), so the ratio is |zeta|^(-2/3)
        assert ratios[0] == pytest.approx(1e-2 ** (-2.0 / 3.0), rel=1e-4)

    def test_equality_quadratic_plateaus(self, registry, config):
        entry = registry("nlp_eq_quadratic")
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config)
        assert estimate.status == "ok"
        assert estimate.plateau_flag
        assert np.isfinite(estimate.kappa_hat)

    def test_verify_bound(self, registry, config):
        entry = registry("nlp_scalar_quadratic")
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config)
        assert SmsrService.verify_bound(estimate, 2.0) == ()
        assert len(SmsrService.verify_bound(estimate, 0.5)) == len(estimate.samples)

    def test_report_and_breakdown(self, registry, config):
        entry = registry("nlp_eq_quadratic")
        estimate = SmsrService.estimate_kappa(entry.problem, entry.reference, config)
        report = SmsrService.smsr_report("nlp_eq_quadratic", entry.problem, estimate, {"K": True})
        assert report.violations == ()
        assert set(report.distance_breakdown) == {"lam", "x", "y"}
        assert report.certificates == {"K": True}
