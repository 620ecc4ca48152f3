"""subreg-kit - strong metric subregularity checks for NLP and optimal control problems."""

from .config import RunConfig, SubregConfig
from .parsers import ProblemParser, parse_problem_file, parse_problem_text

__version__ = "0.1.0"
__all__ = [
    "RunConfig",
    "SubregConfig",
    "ProblemParser",
    "parse_problem_file",
    "parse_problem_text",
]
