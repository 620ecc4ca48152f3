"""
Output formatting utilities.

Import patterns:
- Package-level imports for the report renderers:
  from subreg_kit.utils.formatters import format_text_report, create_table
- Direct imports for the lower-level helpers:
  from subreg_kit.utils.formatters.report_formatter import to_jsonable
"""

from .report_formatter import (
    format_text_report,
    format_value,
    report_csv_rows,
    report_to_dict,
)
from .table_formatter import create_table

__all__ = [
    "format_text_report",
    "format_value",
    "report_csv_rows",
    "report_to_dict",
    "create_table",
]
