"""
Markdown tables for report sections such as sample levels and counterexample rows.
"""

from typing import Any, Callable, Optional, Sequence


def create_table_header(columns: Sequence[str], alignments: Optional[Sequence[str]] = None) -> str:
    """Create a markdown table header with alignment markers.

    Args:
        columns (Sequence[str]): Column names
        alignments (Optional[Sequence[str]], optional): 'left', 'center' or 'right' per
            column. Defaults to right-aligned numbers after a left-aligned first column.

    Raises:
        ValueError: If the number of alignments does not match the number of columns

    Returns:
        str: Header line and separator line

    Example:
        >>> create_table_header(['s', 'J'], ['left', 'right'])
        '| s | J |\\n|:--|--:|'
    """
    if alignments is None:
        alignments = ["left"] + ["right"] * (len(columns) - 1)
    elif len(alignments) != len(columns):
        raise ValueError(
            f"Number of alignments ({len(alignments)}) must match number of columns "
            f"({len(columns)})"
        )

    header = "| " + " | ".join(columns) + " |"
    separators = []
    for column, alignment in zip(columns, alignments):
        width = len(column)
        if alignment == "center":
            separators.append(":" + "-" * width + ":")
        elif alignment == "right":
            separators.append("-" * (width + 1) + ":")
        else:
            separators.append(":" + "-" * (width + 1))
    return f"{header}\n|" + "|".join(separators) + "|"


def create_table_row(cells: Sequence[Any], formatter: Callable[[Any], str] = str) -> str:
    """Create a markdown table row.

    Example:
        >>> create_table_row([1, -0.5])
        '| 1 | -0.5 |'
    """
    return "| " + " | ".join(formatter(cell) for cell in cells) + " |"


def create_table(
    headers: Sequence[str],
    rows: Sequence[Sequence[Any]],
    alignments: Optional[Sequence[str]] = None,
    formatter: Callable[[Any], str] = str,
) -> str:
    """Create a complete markdown table."""
    table = create_table_header(headers, alignments)
    for row in rows:
        table += "\n" + create_table_row(row, formatter)
    return table
