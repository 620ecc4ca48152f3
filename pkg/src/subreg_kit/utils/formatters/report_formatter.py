"""
Rendering of reports as key-value text, flat CSV rows and JSON-ready dicts.

Floats are written with repr so identical runs give byte-identical files.
"""

import csv
import io
import math
from typing import Any, Sequence

import numpy as np

from subreg_kit.utils.data.models import CheckResult, Report
from subreg_kit.utils.formatters.table_formatter import create_table


def format_value(value: Any) -> str:
    """Stable text form of a report value.

    Example:
        >>> format_value(np.array([1.0, 0.5]))
        '[1.0, 0.5]'
    """
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.ndarray):
        return format_value(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    if isinstance(value, (set, frozenset)):
        return "[" + ", ".join(format_value(v) for v in sorted(value)) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {format_value(v)}" for k, v in value.items()) + "}"
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Plain Python structure for orjson; non-finite floats become strings."""
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(value)]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def format_section(check: CheckResult) -> str:
    lines = [f"[{check.name}]", f"status = {check.status}"]
    if not check.gating:
        lines.append("gating = false")
    if check.message:
        lines.append(f"message = {check.message}")
    lines.extend(f"{key} = {format_value(value)}" for key, value in check.entries.items())
    return "\n".join(lines)


def format_text_report(report: Report) -> str:
    """Key-value text report: header, CONFIG echo, one section per check, tables, warnings."""
    parts = [
        "\n".join(
            [
                f"# subreg-kit {report.version}",
                f"command = {report.command}",
                f"problem = {report.problem_id}",
                f"class = {report.kind}",
                f"exit_code = {report.exit_code}",
            ]
        ),
        "\n".join(["[CONFIG]"] + [f"{k} = {format_value(v)}" for k, v in report.config.items()]),
    ]
    if report.summary:
        summary = [f"{k} = {format_value(v)}" for k, v in report.summary.items()]
        parts.append("\n".join(["[SUMMARY]"] + summary))
    parts.extend(format_section(check) for check in report.checks)
    for table in report.tables:
        body = create_table(table.headers, table.rows, table.alignments, format_value)
        parts.append(f"## {table.title}\n\n{body}")
    if report.warnings:
        parts.append("\n".join(["[WARNINGS]"] + [f"- {w}" for w in report.warnings]))
    return "\n\n".join(parts) + "\n"


def report_csv_rows(report: Report) -> list[list[str]]:
    """Flat (check, status, value) rows."""
    rows = [["check", "status", "value"]]
    for check in report.checks:
        rows.append([check.name, check.status, format_value(check.value)])
    return rows


def rows_to_csv(rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else format_value(cell) for cell in row])
    return buffer.getvalue()


def report_to_dict(report: Report) -> dict[str, Any]:
    return to_jsonable(
        {
            "command": report.command,
            "problem": report.problem_id,
            "class": report.kind,
            "version": report.version,
            "exit_code": report.exit_code,
            "config": report.config,
            "summary": report.summary,
            "checks": [
                {
                    "name": c.name,
                    "status": c.status,
                    "gating": c.gating,
                    "message": c.message,
                    "entries": c.entries,
                }
                for c in report.checks
            ],
            "tables": [
                {"title": t.title, "headers": list(t.headers), "rows": [list(r) for r in t.rows]}
                for t in report.tables
            ],
            "warnings": report.warnings,
        }
    )
