"""Parsers for problem files."""

from .base_parser import BaseParser
from .problem_parser import (
    ProblemFile,
    ProblemParser,
    parse_problem_file,
    parse_problem_text,
    serialize_problem,
)

__all__ = [
    "BaseParser",
    "ProblemFile",
    "ProblemParser",
    "parse_problem_file",
    "parse_problem_text",
    "serialize_problem",
]
