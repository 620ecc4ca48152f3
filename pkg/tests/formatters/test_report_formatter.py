import numpy as np
import pytest

from subreg_kit.utils.data.models import CheckResult, Report, ReportTable
from subreg_kit.utils.formatters.report_formatter import (
    format_section,
    format_text_report,
    format_value,
    report_csv_rows,
    report_to_dict,
    rows_to_csv,
    to_jsonable,
)
from subreg_kit.utils.formatters.table_formatter import create_table, create_table_header


@pytest.mark.parametrize(
    "value, text",
    [
        (None, "none"),
        (True, "true"),
        (np.bool_(False), "false"),
        (np.int64(3), "3"),
        (0.1, "0.1"),
        (np.float64(1e-7), "1e-07"),
        (np.array([1.0, 0.5]), "[1.0, 0.5]"),
        ((1, (2, 3)), "[1, [2, 3]]"),
        (frozenset({2, 1}), "[1, 2]"),
        ({"a": 1.5}, "{a: 1.5}"),
        ("text", "text"),
    ],
)
def test_format_value(value, text):
    assert format_value(value) == text


def test_to_jsonable_handles_numpy_and_non_finite():
    data = to_jsonable({"c0": np.float64("inf"), "w": np.array([1, 2]), 3: {np.int32(1)}})
    assert data == {"c0": "inf", "w": [1, 2], "3": [1]}


def test_section_lists_entries_in_order():
    check = CheckResult("COERCIVITY", "pass", {"c0": 2.0, "method": "exact"}, gating=False)
    assert format_section(check) == (
        "[COERCIVITY]\nstatus = pass\ngating = false\nc0 = 2.0\nmethod = exact"
    )


def sample_report():
    return Report(
        "certify",
        "lq_bound",
        "ocp",
        "1.0.0",
        {"seed": 0},
        [CheckResult("CERTIFICATE", "pass", {"route": "extended cone coercivity"})],
        [ReportTable("Levels", ("level", "ratio"), ((0, 1.0),))],
        ["careful"],
        0,
        {"kappa_hat": 1.0},
    )


def test_text_report_layout():
    text = format_text_report(sample_report())
    assert text.startswith("# subreg-kit 1.0.0\ncommand = certify\nproblem = lq_bound\n")
    assert "[CONFIG]\nseed = 0" in text
    assert "[SUMMARY]\nkappa_hat = 1.0" in text
    assert "route = extended cone coercivity" in text
    assert "| level | ratio |" in text
    assert text.endswith("[WARNINGS]\n- careful\n")


def test_csv_rows_and_dict():
    report = sample_report()
    assert report_csv_rows(report) == [
        ["check", "status", "value"],
        ["CERTIFICATE", "pass", "extended cone coercivity"],
    ]
    data = report_to_dict(report)
    assert data["checks"][0]["gating"] is True
    assert data["tables"][0]["rows"] == [[0, 1.0]]


def test_rows_to_csv_quotes_commas():
    assert rows_to_csv([["a", "b,c"], [1, 0.5]]) == 'a,"b,c"\n1,0.5\n'


def test_table_header_alignment():
    assert create_table_header(["s", "J"], ["left", "right"]) == "| s | J |\n|:--|--:|"
    with pytest.raises(ValueError):
        create_table_header(["s", "J"], ["left"])


def test_create_table():
    assert create_table(["s", "J"], [[1, -0.5]]) == "| s | J |\n|:--|--:|\n| 1 | -0.5 |"
