"""
Check suites behind the analyze, certify, perturb and counterexample commands.

A CheckSuite binds one registered problem to a config and hands out named checks for
executor.run_checks. Results needed across checks (certificates, the kappa estimate,
the counterexample report) and any warnings are kept on the suite for the caller.
"""

from functools import partial
from typing import TYPE_CHECKING, Any, Optional, Sequence

import numpy as np

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.executor import FAIL, INCONCLUSIVE, INFO, PASS, SKIP, Check
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.data import constants as C
from subreg_kit.utils.data.models import (
    CheckResult,
    CoercivityCertificate,
    CounterexampleReport,
    GrowthProbeResult,
    HamiltonianGrowthResult,
    KappaEstimate,
    LegendreResult,
    SmsrReport,
)
from subreg_kit.utils.services.cone_service import ConeService
from subreg_kit.utils.services.counterexample_service import CounterexampleService
from subreg_kit.utils.services.mayer_service import MayerService
from subreg_kit.utils.services.nlp_service import NlpService
from subreg_kit.utils.services.ocp_service import OcpService
from subreg_kit.utils.services.smsr_service import SmsrService
from subreg_kit.utils.services.transcription_service import TranscriptionService as T

if TYPE_CHECKING:
    from subreg_kit.utils.core.registry import RegisteredProblem

logger = get_logger(__name__)

TRIVIAL_CONE_WARNING = (
    "K = {0} in the control component is insufficient for local minimality; "
    "see the counterexample command"
)
ROUTE_EXTENDED = "extended cone coercivity"
ROUTE_LEGENDRE = "cone coercivity with strengthened Legendre"
ROUTE_HAMILTONIAN = "cone coercivity with Hamiltonian growth"
GROWTH_RATIO_FLOOR = 0.25  # fitted growth below this share of c0 is worth a warning
COUNTEREXAMPLE_REL_TOL = 0.02


def _definitive(certificate: CoercivityCertificate) -> bool:
    """Certified by the exact or vacuous method (sampled evidence never certifies)."""
    return certificate.certified and certificate.method != "sampled"


def _coercivity_status(certificate: CoercivityCertificate) -> str:
    if _definitive(certificate):
        return PASS
    if certificate.refuted:
        return FAIL
    return INCONCLUSIVE


class CheckSuite:
    """Named checks for one problem.

    Example:
        suite = CheckSuite(load_registry_problem("lq_bound", config), config)
        results = run_checks(suite.certify())
    """

    def __init__(self, entry: "RegisteredProblem", config: SubregConfig):
        self.entry = entry
        self.problem = entry.problem
        self.reference = entry.reference
        self.config = config
        self.warnings: list[str] = []
        self.certificates: dict[str, CoercivityCertificate] = {}
        self.legendre: dict[float, LegendreResult] = {}
        self.hamiltonian: dict[float, HamiltonianGrowthResult] = {}
        self.estimate: Optional[KappaEstimate] = None
        self.smsr: Optional[SmsrReport] = None
        self.counterexample_report: Optional[CounterexampleReport] = None

    @property
    def kind(self) -> str:
        return self.problem.kind

    @property
    def deltas(self) -> list[float]:
        return sorted(self.config.delta_sweep, reverse=True)

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            logger.warning(message)
            self.warnings.append(message)

    # region Command check lists

    def analyze(self) -> list[Check]:
        if self.kind == "nlp":
            return [
                ("ACTIVE_SETS", self.nlp_active_sets, False),
                ("STATIONARITY", self.stationarity, True),
                ("MFCQ", self.nlp_mfcq, False),
                ("STRICT_MFCQ", self.nlp_strict_mfcq, False),
            ]
        if self.kind == "mayer":
            return [
                ("STATIONARITY", self.stationarity, True),
                ("STRICT_MF", self.mayer_strict_mf, False),
                ("CRITICAL_CONE", self.mayer_cone, False),
            ]
        return [
            ("STATIONARITY", self.stationarity, True),
            ("MULTIPLIERS", self.ocp_multipliers, False),
            ("REGULARITY", self.ocp_regularity, False),
            ("TIME_SETS", self.ocp_time_sets, False),
            ("CRITICAL_CONE", self.ocp_cone, False),
        ]

    def certify(self) -> list[Check]:
        if self.kind == "nlp":
            return [
                ("COERCIVITY", self.nlp_coercivity, True),
                ("GROWTH", self.nlp_growth, False),
            ]
        if self.kind == "mayer":
            return [
                ("COERCIVITY", self.mayer_coercivity, True),
                ("GROWTH", self.control_growth, False),
            ]
        checks: list[Check] = [("COERCIVITY_K", self.ocp_coercivity_k, False)]
        for delta in self.deltas:
            tag = f"delta={delta!r}"
            checks.extend(
                [
                    (f"COERCIVITY_KDELTA {tag}", partial(self.ocp_coercivity_delta, delta), False),
                    (f"LEGENDRE {tag}", partial(self.ocp_legendre, delta), False),
                    (f"HAMILTONIAN_GROWTH {tag}", partial(self.ocp_hamiltonian, delta), False),
                ]
            )
        checks.append(("CERTIFICATE", self.ocp_certificate, True))
        checks.append(("GROWTH", self.control_growth, False))
        return checks

    def perturb(self) -> list[Check]:
        """Stationarity gate, non-gating coercivity evidence, then the kappa estimate."""
        checks: list[Check] = [("STATIONARITY", self.stationarity, True)]
        if self.kind == "nlp":
            checks.append(("COERCIVITY", self.nlp_coercivity, False))
        elif self.kind == "mayer":
            checks.append(("COERCIVITY", self.mayer_coercivity, False))
        else:
            checks.append(("COERCIVITY_K", self.ocp_coercivity_k, False))
            delta = self.deltas[0]
            check = partial(self.ocp_coercivity_delta, delta)
            checks.append((f"COERCIVITY_KDELTA delta={delta!r}", check, False))
        checks.append(("KAPPA", self.kappa, True))
        return checks

    def counterexample(self, s_values: Sequence[int] = C.COUNTEREXAMPLE_S_VALUES) -> list[Check]:
        return [
            ("COUNTEREXAMPLE", partial(self.competitors, tuple(s_values)), True),
            ("CRITICAL_CONE", self.counterexample_cone, False),
            ("MULTIPLIERS", self.counterexample_multipliers, False),
        ]

    # endregion

    # region Stationarity

    def stationarity(self) -> CheckResult:
        """Residual of the optimality system at the reference, against tol_residual."""
        tol = self.config.tol_residual
        if self.kind == "nlp":
            residual = NlpService.kkt_residual(self.problem, self.reference)
            entries: dict[str, Any] = {
                "norm": residual.norm,
                "xi": residual.xi,
                "eta": residual.eta,
                "zeta": residual.zeta,
            }
        elif self.kind == "mayer":
            r = MayerService.mayer_stationarity(self.problem, self.reference, self.config)
            h = self.reference.mesh.h
            endpoint = self.reference.endpoint
            entries = {
                "norm": r.norm,
                "pi_l1": T.time_l1(r.pi, h),
                "rho_l2": T.time_l2(r.rho, h),
                "nu": r.nu,
                "eta_l1": T.time_l1(r.eta, h),
                "mu": r.mu,
                "xi": r.xi,
                "alpha0": endpoint.alpha0,
                "alpha": endpoint.alpha,
                "beta": endpoint.beta,
            }
        else:
            r = OcpService.optimality_residuals_ocp(self.problem, self.reference, self.config)
            h = self.reference.mesh.h
            entries = {
                "norm": r.norm,
                "budget_norm": r.budget_norm,
                "nu": r.nu,
                "pi_l1": T.time_l1(r.pi, h),
                "rho_l2": T.time_l2(r.rho, h),
                "xi_l1": T.time_l1(r.xi, h),
                "eta_l2": T.time_l2(r.eta, h),
            }
        entries["tol_residual"] = tol
        status = PASS if entries["norm"] <= tol else FAIL
        return CheckResult("STATIONARITY", status, entries)

    # endregion

    # region NLP

    def nlp_active_sets(self) -> CheckResult:
        sets = NlpService.active_sets(self.problem, self.reference, self.config)
        return CheckResult(
            "ACTIVE_SETS",
            INFO,
            {
                "active": sets.active,
                "biactive": sets.inactive_mult,
                "strongly_active": sets.positive_mult,
            },
        )

    def nlp_mfcq(self) -> CheckResult:
        result = NlpService.check_mfcq(self.problem, self.reference.x, self.config)
        entries: dict[str, Any] = {"holds": result.holds}
        if result.witness is not None:
            entries["witness"] = result.witness
        if result.interior_direction is not None:
            entries["interior_direction"] = result.interior_direction
        return CheckResult("MFCQ", PASS if result.holds else FAIL, entries, message=result.reason)

    def nlp_strict_mfcq(self) -> CheckResult:
        result = NlpService.check_strict_mfcq(self.problem, self.reference, self.config)
        entries: dict[str, Any] = {
            "holds": result.holds,
            "multipliers_unique": result.multipliers_unique,
        }
        if result.witness is not None:
            entries["witness"] = result.witness
        return CheckResult(
            "STRICT_MFCQ", PASS if result.holds else FAIL, entries, message=result.reason
        )

    def nlp_coercivity(self) -> CheckResult:
        cone = NlpService.critical_cone_nlp(self.problem, self.reference, config=self.config)
        form = NlpService.quadratic_form_nlp(self.problem, self.reference)
        certificate = ConeService.certify_coercivity(form, cone, self.config)
        self.certificates["K"] = certificate
        return self._coercivity_result("COERCIVITY", certificate, vector_counterexample=True)

    def nlp_growth(self) -> CheckResult:
        probe = NlpService.quadratic_growth_probe(self.problem, self.reference, config=self.config)
        return self._growth_result(probe)

    # endregion

    # region Mayer

    def mayer_strict_mf(self) -> CheckResult:
        result = MayerService.check_strict_mf_mayer(self.problem, self.reference, self.config)
        entries: dict[str, Any] = {"holds": result.holds}
        if result.witness is not None:
            entries["witness"] = result.witness
        return CheckResult(
            "STRICT_MF", PASS if result.holds else FAIL, entries, message=result.reason
        )

    def mayer_cone(self) -> CheckResult:
        cone = MayerService.mayer_critical_cone(self.problem, self.reference, self.config)
        return CheckResult(
            "CRITICAL_CONE",
            INFO,
            {"dim": cone.dim, "inequality_rows": cone.A.shape[0], "equality_rows": cone.B.shape[0]},
        )

    def mayer_coercivity(self) -> CheckResult:
        certificate = MayerService.certify_coercivity_mayer(
            self.problem, self.reference, self.config
        )
        self.certificates["K"] = certificate
        return self._coercivity_result("COERCIVITY", certificate)

    # endregion

    # region OCP

    def ocp_multipliers(self) -> CheckResult:
        lam = self.reference.lam
        if lam.size == 0:
            return CheckResult("MULTIPLIERS", INFO, {"k": 0})
        return CheckResult(
            "MULTIPLIERS",
            INFO,
            {
                "lambda_min": float(np.min(lam)),
                "lambda_max": float(np.max(lam)),
                "p0": self.reference.p[0],
                "pN": self.reference.p[-1],
            },
        )

    def ocp_regularity(self) -> CheckResult:
        result = OcpService.check_control_regularity(
            self.problem, self.reference.u, self.reference.mesh, self.config
        )
        return CheckResult(
            "REGULARITY",
            PASS if result.holds else FAIL,
            {"holds": result.holds, "worst_node": result.worst_node,
             "min_singular_value": result.min_singular_value},
        )

    def ocp_time_sets(self) -> CheckResult:
        """Measure of m_δ for each δ of the sweep."""
        entries: dict[str, Any] = {}
        point = self.reference
        for delta in self.deltas:
            sets = OcpService.time_sets(
                self.problem, point.u, point.lam, point.mesh, delta, self.config
            )
            entries[f"low_measure delta={delta!r}"] = sets.h * len(sets.low)
            entries[f"low_nodes delta={delta!r}"] = len(sets.low)
        sets = OcpService.time_sets(
            self.problem, point.u, point.lam, point.mesh, self.deltas[0], self.config
        )
        entries["active_nodes"] = [len(a) for a in sets.active]
        entries["strongly_active_nodes"] = [len(a) for a in sets.positive]
        return CheckResult("TIME_SETS", INFO, entries)

    def ocp_cone(self) -> CheckResult:
        point = self.reference
        cone = OcpService.discrete_critical_cone_ocp(self.problem, point, config=self.config)
        report = OcpService.control_component_report(
            cone, self.problem.n, self.problem.m, point.mesh, self.config
        )
        derivative = OcpService.endpoint_derivative_on_cone(
            self.problem, point, cone, config=self.config
        )
        if report.trivial:
            self.warn(TRIVIAL_CONE_WARNING)
        return CheckResult(
            "CRITICAL_CONE",
            INFO,
            {
                "pinned_nodes": len(report.pinned_nodes),
                "free_nodes": len(report.free_nodes),
                "free_measure": report.free_measure,
                "control_component_trivial": report.trivial,
                "endpoint_derivative": derivative,
            },
        )

    def ocp_coercivity_k(self) -> CheckResult:
        certificate = OcpService.certify_coercivity_ocp(
            self.problem, self.reference, None, self.config
        )
        self.certificates["K"] = certificate
        return self._coercivity_result("COERCIVITY_K", certificate)

    def ocp_coercivity_delta(self, delta: float) -> CheckResult:
        certificate = OcpService.certify_coercivity_ocp(
            self.problem, self.reference, delta, self.config
        )
        self.certificates[f"K_delta={delta!r}"] = certificate
        result = self._coercivity_result(f"COERCIVITY_KDELTA delta={delta!r}", certificate)
        result.entries = {"delta": delta, **result.entries}
        return result

    def ocp_legendre(self, delta: float) -> CheckResult:
        result = OcpService.check_legendre(self.problem, self.reference, delta, self.config)
        self.legendre[delta] = result
        entries: dict[str, Any] = {"delta": delta, "c_l": result.c_l}
        if not result.holds and result.violating_node is not None:
            node = result.violating_node
            entries["violating_node"] = node
            entries["violating_time"] = float(self.reference.mesh.left_nodes[node])
        return CheckResult(f"LEGENDRE delta={delta!r}", PASS if result.holds else FAIL, entries)

    def ocp_hamiltonian(self, delta: float) -> CheckResult:
        result = OcpService.check_hamiltonian_growth(
            self.problem, self.reference, delta, seed=self.config.seed, config=self.config
        )
        self.hamiltonian[delta] = result
        entries: dict[str, Any] = {"delta": delta, "c_h": result.c_h, "eps_h": result.eps_h}
        if result.violating_node is not None:
            entries["violating_node"] = result.violating_node
        if result.violating_control is not None:
            entries["violating_control"] = result.violating_control
        if result.status == "inconclusive":
            status = INCONCLUSIVE
        else:
            status = PASS if result.holds else FAIL
        return CheckResult(f"HAMILTONIAN_GROWTH delta={delta!r}", status, entries)

    def ocp_certificate(self) -> CheckResult:
        """First route to a sufficient condition, in order of strength."""
        base = self.certificates.get("K")
        cone_ok = base is not None and _definitive(base)
        routes: list[tuple[str, float, float]] = []
        for delta in self.deltas:
            certificate = self.certificates.get(f"K_delta={delta!r}")
            if certificate is not None and _definitive(certificate):
                routes.append((ROUTE_EXTENDED, delta, certificate.c0))
        if cone_ok:
            for delta in self.deltas:
                legendre = self.legendre.get(delta)
                if legendre is not None and legendre.holds:
                    routes.append((ROUTE_LEGENDRE, delta, min(base.c0, legendre.c_l)))
            for delta in self.deltas:
                growth = self.hamiltonian.get(delta)
                if growth is not None and growth.holds:
                    routes.append((ROUTE_HAMILTONIAN, delta, min(base.c0, growth.c_h)))

        if routes:
            route, delta, c = routes[0]
            logger.info(f"Certified '{self.entry.problem_id}' by {route} at delta={delta!r}")
            return CheckResult("CERTIFICATE", PASS, {"route": route, "delta": delta, "c": c})

        entries: dict[str, Any] = {"route": "none"}
        refuted_deltas = [
            delta
            for delta in self.deltas
            if self.certificates.get(f"K_delta={delta!r}") is not None
            and self.certificates[f"K_delta={delta!r}"].refuted
        ]
        if refuted_deltas:
            entries["refuted_deltas"] = refuted_deltas
            support = self._counterexample_support(
                self.certificates[f"K_delta={refuted_deltas[0]!r}"]
            )
            entries.update(support)
        pointwise_open = any(
            g.status == "inconclusive" for g in self.hamiltonian.values()
        )
        if base is not None and base.refuted:
            entries.update(self._counterexample_support(base))
            return CheckResult(
                "CERTIFICATE", FAIL, entries, message="second-order condition fails on K"
            )
        if len(refuted_deltas) == len(self.deltas) and not pointwise_open and cone_ok:
            return CheckResult(
                "CERTIFICATE",
                FAIL,
                entries,
                message="no route: K_delta refuted and both pointwise conditions fail",
            )
        return CheckResult(
            "CERTIFICATE", INCONCLUSIVE, entries, message="only sampled evidence is available"
        )

    def _counterexample_support(self, certificate: CoercivityCertificate) -> dict[str, Any]:
        """Where the control part of a counterexample direction lives."""
        v = certificate.counterexample
        if v is None:
            return {}
        x0, u = T.split(v, self.problem.n, self.problem.m)
        size = np.abs(u).max(axis=1) if u.size else np.zeros(0)
        entries: dict[str, Any] = {"counterexample_x0": x0}
        if size.size and size.max() > 0:
            nodes = np.flatnonzero(size > 1e-8 * size.max())
            times = self.reference.mesh.left_nodes[nodes]
            entries["counterexample_nodes"] = len(nodes)
            entries["counterexample_support"] = [float(times.min()), float(times.max())]
        return entries

    def control_growth(self) -> CheckResult:
        probe = OcpService.growth_probe_control(self.problem, self.reference, config=self.config)
        return self._growth_result(probe)

    # endregion

    # region Perturbation harness

    def kappa(self) -> CheckResult:
        radius = self.config.radius_a or self.entry.radius_a
        estimate = SmsrService.estimate_kappa(
            self.problem, self.reference, self.config, radius_a=radius
        )
        certificates = {name: _definitive(c) for name, c in self.certificates.items()}
        report = SmsrService.smsr_report(
            self.entry.problem_id, self.problem, estimate, certificates
        )
        self.estimate, self.smsr = estimate, report

        converged = [s for s in estimate.samples if s.converged]
        entries: dict[str, Any] = {
            "kappa_hat": estimate.kappa_hat,
            "plateau": estimate.plateau_flag,
            "radius_a": estimate.radius_a,
            "bound_b": estimate.bound_b,
            "budget_proxy": max((s.budget_norm for s in converged), default=0.0),
            "converged_fraction": estimate.converged_fraction,
            "level_max_ratios": estimate.level_max_ratios,
            "violations": len(report.violations),
            "distance_breakdown": report.distance_breakdown,
            "certificates": certificates,
        }
        if estimate.status == "inconclusive":
            return CheckResult(
                "KAPPA", INCONCLUSIVE, entries, message="too few perturbed solves converged"
            )
        if not estimate.plateau_flag:
            self.warn(
                "worst ratio grows as the perturbation shrinks; no linear bound is visible"
            )
            if any(certificates.values()):
                self.warn("coercivity is certified but the sampled ratios do not plateau")
        status = PASS if estimate.plateau_flag and not report.violations else FAIL
        return CheckResult("KAPPA", status, entries)

    # endregion

    # region Counterexample

    def _require_counterexample_shape(self) -> None:
        if self.kind != "ocp" or self.problem.m != 1 or self.problem.k < 1:
            raise ProblemInputError(
                f"The counterexample needs a scalar-control OCP with a control constraint, "
                f"got '{self.entry.problem_id}' ({self.kind})"
            )

    def competitors(self, s_values: tuple[int, ...]) -> CheckResult:
        """Competitors u_s undercut the reference cost at every s."""
        self._require_counterexample_shape()
        report = CounterexampleService.example1_counterexample(
            self.problem, self.reference, s_values, self.config
        )
        self.counterexample_report = report
        worst = max((row.rel_error for row in report.rows), default=0.0)
        if worst > COUNTEREXAMPLE_REL_TOL:
            self.warn(
                f"relative error {worst:.3g} against the closed form exceeds "
                f"{COUNTEREXAMPLE_REL_TOL}; refine the mesh"
            )
        beats = all(row.j_value < 0.0 for row in report.rows)
        return CheckResult(
            "COUNTEREXAMPLE",
            PASS if beats else FAIL,
            {
                "n_intervals": report.mesh.n_intervals,
                "reference_cost": report.reference_cost,
                "j_values": [row.j_value for row in report.rows],
                "max_rel_error": worst,
                "min_sup_distance": min((row.sup_distance for row in report.rows), default=0.0),
            },
        )

    def counterexample_cone(self) -> CheckResult:
        report = self.counterexample_report
        if report is None:
            return CheckResult("CRITICAL_CONE", SKIP, message="competitors not evaluated")
        component = report.control_component
        if component.trivial:
            self.warn(TRIVIAL_CONE_WARNING)
        return CheckResult(
            "CRITICAL_CONE",
            INFO,
            {
                "control_component_trivial": component.trivial,
                "free_nodes": component.free_nodes,
                "free_measure": component.free_measure,
            },
        )

    def counterexample_multipliers(self) -> CheckResult:
        """λ(t) = t and a constant adjoint, up to the mesh width."""
        report = self.counterexample_report
        if report is None:
            return CheckResult("MULTIPLIERS", SKIP, message="competitors not evaluated")
        h = report.mesh.h
        p_deviation = float(np.max(np.abs(self.reference.p - self.reference.p[-1])))
        ok = report.multiplier_deviation <= h and p_deviation <= h
        return CheckResult(
            "MULTIPLIERS",
            PASS if ok else FAIL,
            {"lambda_deviation": report.multiplier_deviation, "p_deviation": p_deviation},
        )

    # endregion

    # region Shared result builders

    def _coercivity_result(
        self, name: str, certificate: CoercivityCertificate, vector_counterexample: bool = False
    ) -> CheckResult:
        entries: dict[str, Any] = {
            "c0": certificate.c0,
            "method": certificate.method,
            "certified": _definitive(certificate),
            "refuted": certificate.refuted,
            "faces_examined": certificate.faces_examined,
        }
        if certificate.sup_norm_ratio is not None:
            entries["sup_norm_ratio"] = certificate.sup_norm_ratio
        if certificate.counterexample is not None:
            if vector_counterexample:
                entries["counterexample"] = certificate.counterexample
            else:
                entries.update(self._counterexample_support(certificate))
        if certificate.method == "vacuous":
            self.warn(f"{name}: the critical cone is {{0}}, so coercivity holds vacuously")
        return CheckResult(
            name, _coercivity_status(certificate), entries, message="; ".join(certificate.notes)
        )

    def _growth_result(self, probe: GrowthProbeResult) -> CheckResult:
        entries: dict[str, Any] = {
            "fitted_c": probe.fitted_c,
            "n_samples": probe.n_samples,
            "n_rejected": probe.n_rejected,
            "n_retraction_failures": probe.n_retraction_failures,
            "violations": len(probe.violations),
        }
        certificate = self.certificates.get("K")
        if certificate is not None and _definitive(certificate) and np.isfinite(certificate.c0):
            share = probe.fitted_c / certificate.c0
            entries["share_of_c0"] = share
            if share < GROWTH_RATIO_FLOOR:
                self.warn(
                    f"fitted growth {probe.fitted_c:.4g} is below {GROWTH_RATIO_FLOOR} c0"
                )
        if probe.n_samples == 0:
            return CheckResult("GROWTH", INCONCLUSIVE, entries, message=probe.note)
        status = FAIL if probe.violations else PASS
        return CheckResult("GROWTH", status, entries, message=probe.note)

    # endregion
