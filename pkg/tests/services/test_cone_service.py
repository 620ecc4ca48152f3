import numpy as np
import pytest
from scipy.optimize import minimize

from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.data.models import PolyhedralCone, QuadraticFormRep
from subreg_kit.utils.services.cone_service import ConeService


def form(matrix, gram=None):
    matrix = np.asarray(matrix, dtype=float)
    gram = np.eye(matrix.shape[0]) if gram is None else np.asarray(gram, dtype=float)
    return QuadraticFormRep(matrix, gram)


class TestExactCertificates:
    def test_positive_on_a_line(self, config):
        cone = PolyhedralCone.from_rows(2, eq=[[1.0, 1.0]])
        certificate = ConeService.certify_coercivity(form(np.diag([2.0, 2.0])), cone, config)
        assert certificate.certified
        assert certificate.method == "exact"
        assert certificate.c0 == pytest.approx(2.0)
        assert certificate.counterexample is None

    def test_indefinite_form_on_the_plane_is_refuted(self, config):
        cone = PolyhedralCone.from_rows(2)
        certificate = ConeService.certify_coercivity(form(np.diag([1.0, -1.0])), cone, config)
        assert not certificate.certified
        assert certificate.refuted
        assert certificate.c0 == pytest.approx(-1.0)
        direction = certificate.counterexample / np.linalg.norm(certificate.counterexample)
        assert abs(direction[1]) == pytest.approx(1.0)

    def test_axis_cone_excludes_the_negative_direction(self, config):
        cone = PolyhedralCone.from_rows(2, ineq=[[0.0, 1.0], [0.0, -1.0]])
        certificate = ConeService.certify_coercivity(form(np.diag([1.0, -1.0])), cone, config)
        assert certificate.certified
        assert certificate.c0 == pytest.approx(1.0)

    def test_half_space_keeps_the_negative_direction(self, config):
        cone = PolyhedralCone.from_rows(2, ineq=[[0.0, 1.0]])
        certificate = ConeService.certify_coercivity(form(np.diag([1.0, -1.0])), cone, config)
        assert certificate.refuted
        assert cone.contains(certificate.counterexample)

    def test_weak_norm_gram_scales_the_constant(self, config):
        cone = PolyhedralCone.from_rows(2)
        certificate = ConeService.certify_coercivity(
            form(np.diag([2.0, 2.0]), np.diag([4.0, 1.0])), cone, config
        )
        assert certificate.c0 == pytest.approx(0.5)

    def test_zero_cone_is_vacuous(self, config):
        cone = PolyhedralCone.from_rows(2, eq=np.eye(2))
        certificate = ConeService.certify_coercivity(form(np.diag([-1.0, -1.0])), cone, config)
        assert certificate.certified
        assert certificate.method == "vacuous"
        assert certificate.c0 == float("inf")
        assert any("vacuous" in note for note in certificate.notes)

    def test_shape_mismatch(self, config):
        with pytest.raises(ProblemInputError):
            ConeService.certify_coercivity(form(np.eye(3)), PolyhedralCone.from_rows(2), config)


class TestSampledEvidence:
    def test_sampled_method_never_certifies(self, config):
        config.d_max = 2
        cone = PolyhedralCone.from_rows(3, ineq=[[-1.0, 0.0, 0.0]])
        certificate = ConeService.certify_coercivity(form(np.eye(3)), cone, config)
        assert certificate.method == "sampled"
        assert not certificate.certified
        assert not certificate.refuted

    def test_sampled_counterexample_is_genuine(self, config):
        config.d_max = 2
        cone = PolyhedralCone.from_rows(3, ineq=[[-1.0, 0.0, 0.0]])
        certificate = ConeService.certify_coercivity(form(np.diag([-1.0, 1.0, 1.0])), cone, config)
        assert certificate.refuted
        y = certificate.counterexample
        assert cone.contains(y)
        assert y @ np.diag([-1.0, 1.0, 1.0]) @ y < 0


def brute_force_minimum(M, A, rng, samples=100_000):
    """Upper bound on min yᵀMy over {Ay <= 0, |y| = 1} by sampling and local polishing."""
    d, r = M.shape[0], A.shape[0]
    completion = np.vstack([A, rng.normal(size=(d - r, d))])
    w = rng.normal(size=(samples, d))
    if r:
        w[:, :r] = -np.abs(w[:, :r]) * (rng.random((samples, r)) > 0.3)
    v = np.linalg.solve(completion, w.T).T
    norms = np.linalg.norm(v, axis=1)
    v = v[norms > 1e-12] / norms[norms > 1e-12, None]
    values = np.einsum("ij,jk,ik->i", v, M, v)
    best = float(values.min())
    constraints = [{"type": "eq", "fun": lambda y: y @ y - 1.0}]
    if r:
        constraints.append({"type": "ineq", "fun": lambda y: -(A @ y)})
    for start in v[np.argsort(values)[:20]]:
        result = minimize(lambda y: y @ M @ y, start, method="SLSQP", constraints=constraints)
        y = result.x / np.linalg.norm(result.x)
        if r == 0 or np.max(A @ y) <= 1e-9:
            best = min(best, float(y @ M @ y))
    return best


@pytest.mark.parametrize("trial", range(50))
def test_exact_minimum_matches_sampled_oracle(trial, config):
    rng = np.random.default_rng(1000 + trial)
    d = int(rng.integers(1, 6))
    r = int(rng.integers(0, d + 1))
    S = rng.normal(size=(d, d))
    M = 0.5 * (S + S.T)
    M /= np.linalg.norm(M, 2)
    A = rng.normal(size=(r, d))
    cone = PolyhedralCone.from_rows(d, ineq=A)
    certificate = ConeService.certify_coercivity(form(M), cone, config)
    assert certificate.method == "exact"
    oracle = brute_force_minimum(M, A, rng)
    assert certificate.c0 <= oracle + 1e-6
    assert certificate.c0 == pytest.approx(oracle, abs=1e-3)
