"""
Command-line interface for subreg-kit.

    subreg-kit analyze --registry lq_bound
    subreg-kit certify --problem my_problem.txt --mesh-n 400
    subreg-kit perturb --registry nlp_scalar_quartic --seed 3 --format csv
    subreg-kit counterexample --mesh-n 1000 --s-values 1,2,4
    subreg-kit list

Exit codes: 0 ok, 1 refuted, 2 input error, 3 inconclusive.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from subreg_kit import __version__
from subreg_kit.config import RunConfig, SubregConfig
from subreg_kit.generators.report_generators import (
    CounterexampleGenerator,
    ReportGenerator,
    SampleCsvGenerator,
    TrajectoryCsvGenerator,
    counterexample_table,
    kappa_level_table,
)
from subreg_kit.utils.core.config_registry import set_config
from subreg_kit.utils.core.errors import ProblemInputError
from subreg_kit.utils.core.executor import EXIT_INPUT, Check, exit_code, run_checks
from subreg_kit.utils.core.loader import ConfigLoader
from subreg_kit.utils.core.logger import LogContext, configure_logging_system, get_logger
from subreg_kit.utils.core.registry import (
    RegisteredProblem,
    load_problem_file,
    load_registry_problem,
    registry_ids,
)
from subreg_kit.utils.data.models import ControlTuple, Report, ReportTable
from subreg_kit.utils.formatters.report_formatter import format_text_report
from subreg_kit.utils.services.analysis_service import CheckSuite

logger = get_logger(__name__)

COMMANDS = ("analyze", "certify", "perturb", "counterexample")
COUNTEREXAMPLE_PROBLEM = "example1"


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the input-error code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--problem", metavar="FILE", help="problem file to analyze")
    source.add_argument("--registry", metavar="ID", help="built-in problem id (see 'list')")
    common.add_argument("--config", metavar="FILE", help="YAML or JSON settings file")
    common.add_argument("--mesh-n", type=int, help="Euler intervals for control problems")
    common.add_argument("--delta-sweep", type=_floats, help="comma-separated delta values")
    common.add_argument("--tol-act", type=float, help="activity tolerance")
    common.add_argument("--tol-mul", type=float, help="positive-multiplier threshold")
    common.add_argument("--seed", type=int, help="seed for every sampled quantity")
    common.add_argument("--magnitudes", type=_floats, help="perturbation magnitudes")
    common.add_argument("--samples", type=int, help="perturbations per magnitude")
    common.add_argument("--radius", type=float, help="localization radius a")
    common.add_argument("--blocks", type=_names, help="perturbation blocks to enable")
    common.add_argument("--workers", type=int, help="threads for perturbed solves")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--format", choices=("text", "csv"), default="text")
    common.add_argument(
        "--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
    )

    parser = _Parser(
        prog="subreg-kit",
        description="Strong metric subregularity checks for NLP and optimal control problems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands.add_parser("analyze", parents=[common], help="stationarity, sets and CQs")
    commands.add_parser("certify", parents=[common], help="second-order sufficient conditions")
    commands.add_parser("perturb", parents=[common], help="empirical subregularity modulus")
    counterexample = commands.add_parser(
        "counterexample", parents=[common], help="cost of competitors to a trivial-cone point"
    )
    counterexample.add_argument("--s-values", type=_ints, help="competitor indices s")
    listing = commands.add_parser("list", help="built-in problem ids")
    listing.add_argument("--config", metavar="FILE", help="YAML or JSON settings file")
    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file and command-line overrides into a RunConfig.

    Raises:
        ValueError: If settings are invalid or the problem source is ambiguous.
        FileNotFoundError: If the config file does not exist.
    """
    mesh_key = "counterexample_mesh_n" if args.command == "counterexample" else "mesh_n"
    overrides: dict[str, Any] = {
        mesh_key: args.mesh_n,
        "delta_sweep": args.delta_sweep,
        "tol_act": args.tol_act,
        "tol_mul": args.tol_mul,
        "seed": args.seed,
        "magnitudes": args.magnitudes,
        "samples_per_magnitude": args.samples,
        "radius_a": args.radius,
        "blocks": args.blocks,
        "workers": args.workers,
        "output_dir": args.out,
        "logging_level": args.log_level,
    }
    settings = ConfigLoader.load_config(args.config, overrides)
    extra: dict[str, Any] = {}
    if getattr(args, "s_values", None):
        extra["s_values"] = args.s_values
    return RunConfig(
        command=args.command,
        problem_path=args.problem,
        registry_id=args.registry,
        output_format=args.format,
        settings=settings,
        **extra,
    )


def load_entry(run: RunConfig) -> RegisteredProblem:
    config = run.settings
    mesh_n = config.counterexample_mesh_n if run.command == "counterexample" else None
    if run.problem_path:
        return load_problem_file(run.problem_path, config, mesh_n)
    return load_registry_problem(run.registry_id or COUNTEREXAMPLE_PROBLEM, config, mesh_n)


@dataclass
class CommandOutcome:
    report: Report
    suite: CheckSuite


def run_command(run: RunConfig, entry: Optional[RegisteredProblem] = None) -> CommandOutcome:
    """Run one command's checks and assemble its report; nothing is written.

    Raises:
        ProblemInputError: If the problem cannot be loaded or the mesh is unusable.
    """
    config = run.settings
    set_config(config)
    entry = entry or load_entry(run)
    suite = CheckSuite(entry, config)
    builders: dict[str, Callable[[], list[Check]]] = {
        "analyze": suite.analyze,
        "certify": suite.certify,
        "perturb": suite.perturb,
        "counterexample": lambda: suite.counterexample(run.s_values),
    }
    with LogContext(logger, f"{run.command} '{entry.problem_id}'"):
        results = run_checks(builders[run.command]())

    tables: list[ReportTable] = []
    if suite.estimate is not None:
        tables.append(kappa_level_table(suite.estimate))
    if suite.counterexample_report is not None:
        tables.append(counterexample_table(suite.counterexample_report))

    echo = config.echo()
    echo["source"] = run.problem_path or f"registry:{entry.problem_id}"
    if run.command == "counterexample":
        echo["s_values"] = run.s_values
    summary: dict[str, Any] = {"description": entry.description} if entry.description else {}
    if isinstance(entry.reference, ControlTuple):
        summary["n_intervals"] = entry.reference.mesh.n_intervals

    report = Report(
        command=run.command,
        problem_id=entry.problem_id,
        kind=entry.kind,
        version=__version__,
        config=echo,
        checks=results,
        tables=tables,
        warnings=list(suite.warnings),
        exit_code=exit_code(results),
        summary=summary,
    )
    return CommandOutcome(report, suite)


def write_outputs(run: RunConfig, outcome: CommandOutcome) -> list[Path]:
    config: SubregConfig = run.settings
    report, suite = outcome.report, outcome.suite
    paths = ReportGenerator(config).generate(report, run.output_format)
    if suite.estimate is not None:
        paths += SampleCsvGenerator(config).generate(report.problem_id, suite.estimate)
    if suite.counterexample_report is not None:
        paths += CounterexampleGenerator(config).generate(
            report.problem_id, suite.counterexample_report
        )
    if run.command == "analyze" and isinstance(suite.reference, ControlTuple):
        paths += TrajectoryCsvGenerator(config).generate(report.problem_id, suite.reference)
    return paths


def cmd_list(args: argparse.Namespace) -> int:
    config = ConfigLoader.load_config(args.config)
    for problem_id in registry_ids(config):
        print(problem_id)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            return cmd_list(args)
        run = build_run_config(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"subreg-kit: error: {e}", file=sys.stderr)
        return EXIT_INPUT

    configure_logging_system(run.settings)
    try:
        outcome = run_command(run)
        paths = write_outputs(run, outcome)
    except (ProblemInputError, FileNotFoundError) as e:
        logger.error(f"Input error: {e}")
        print(f"subreg-kit: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        logger.error(f"Unexpected failure in '{run.command}': {e}", exc_info=True)
        print(f"subreg-kit: unexpected error: {e}", file=sys.stderr)
        return EXIT_INPUT

    if run.output_format == "text":
        sys.stdout.write(format_text_report(outcome.report))
    for path in paths:
        logger.info(f"Wrote {path}")
    return outcome.report.exit_code


if __name__ == "__main__":
    sys.exit(main())
