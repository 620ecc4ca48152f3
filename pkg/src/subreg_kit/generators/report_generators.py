"""
Generators for analysis reports, perturbation samples, counterexample tables and
trajectory dumps.
"""

from pathlib import Path
from typing import Any

from subreg_kit.generators.base_generator import BaseGenerator
from subreg_kit.utils.data.models import (
    ControlTuple,
    CounterexampleReport,
    KappaEstimate,
    Report,
    ReportTable,
)
from subreg_kit.utils.formatters.report_formatter import (
    format_text_report,
    report_csv_rows,
    report_to_dict,
)

SAMPLE_COLUMNS = (
    "level",
    "index",
    "magnitude",
    "norm_z",
    "budget_norm",
    "dist_weak",
    "dist_strong_primal",
    "dist_weak_primal",
)
COUNTEREXAMPLE_COLUMNS = ("s", "J", "closed_form", "rel_error", "sup_distance")


def kappa_level_table(estimate: KappaEstimate) -> ReportTable:
    """Worst ratio and convergence count per magnitude level."""
    rows = []
    for level, worst in enumerate(estimate.level_max_ratios):
        samples = [s for s in estimate.samples if s.level == level]
        converged = sum(s.converged for s in samples)
        magnitude = samples[0].magnitude if samples else float("nan")
        rows.append((level, magnitude, worst, f"{converged}/{len(samples)}"))
    headers = ("level", "magnitude", "max_ratio", "converged")
    return ReportTable("Ratios by magnitude", headers, tuple(rows))


def counterexample_table(report: CounterexampleReport) -> ReportTable:
    rows = tuple(
        (r.s, r.j_value, r.closed_form, r.rel_error, r.sup_distance) for r in report.rows
    )
    return ReportTable("Competitors u_s", COUNTEREXAMPLE_COLUMNS, rows)


class ReportGenerator(BaseGenerator):
    """Writes a Report as text or flat CSV, plus its JSON mirror."""

    def generate(self, report: Report, output_format: str = "text") -> list[Path]:
        stem = f"{report.command}_{report.problem_id}"
        if output_format == "csv":
            main = self.write_csv(f"{stem}.csv", report_csv_rows(report))
        else:
            main = self.write_text(f"{stem}.txt", format_text_report(report))
        mirror = self.write_json(f"{stem}.json", report_to_dict(report))
        self.logger.info(f"Wrote {report.command} report for '{report.problem_id}' to {main}")
        return [main, mirror]


class SampleCsvGenerator(BaseGenerator):
    """One row per perturbed solve: sizes, distances, ratio, convergence and active set."""

    def generate(self, problem_id: str, estimate: KappaEstimate) -> list[Path]:
        distance_keys = sorted({k for s in estimate.samples for k in s.distances})
        header = (
            list(SAMPLE_COLUMNS)
            + [f"dist_{k}" for k in distance_keys]
            + ["ratio", "converged", "branches", "active_set_signature"]
        )
        rows: list[list[Any]] = [header]
        for s in estimate.samples:
            rows.append(
                [
                    s.level,
                    s.index,
                    s.magnitude,
                    s.norm,
                    s.budget_norm,
                    s.dist_weak,
                    s.dist_strong_primal,
                    s.dist_weak_primal,
                ]
                + [s.distances.get(k, float("nan")) for k in distance_keys]
                + [s.ratio, s.converged, s.branches, s.signature]
            )
        return [self.write_csv(f"perturb_{problem_id}_samples.csv", rows)]


class CounterexampleGenerator(BaseGenerator):
    """CSV of J(u_s) against s for plotting."""

    def generate(self, problem_id: str, report: CounterexampleReport) -> list[Path]:
        table = counterexample_table(report)
        rows = [list(table.headers)] + [list(r) for r in table.rows]
        return [self.write_csv(f"counterexample_{problem_id}.csv", rows)]


class TrajectoryCsvGenerator(BaseGenerator):
    """Columns t, x, u, p, lambda; u and lambda sit at the left node of their interval."""

    def generate(self, problem_id: str, point: ControlTuple) -> list[Path]:
        N = point.mesh.n_intervals
        n, m, k = point.x.shape[1], point.u.shape[1], point.lam.shape[1]
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"u{i + 1}" for i in range(m)]
            + [f"p{i + 1}" for i in range(n)]
            + [f"lambda{i + 1}" for i in range(k)]
        )
        rows: list[list[Any]] = [header]
        for i, t in enumerate(point.mesh.nodes):
            interval = i < N
            u = point.u[i].tolist() if interval else [""] * m
            lam = point.lam[i].tolist() if interval else [""] * k
            rows.append([float(t)] + point.x[i].tolist() + u + point.p[i].tolist() + lam)
        return [self.write_csv(f"trajectory_{problem_id}.csv", rows)]
