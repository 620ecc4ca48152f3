"""Core infrastructure utilities.

Only modules free of data-layer imports are re-exported here; import executor,
loader and registry from their own modules.
"""

from .config_registry import clear_config, get_config, get_config_or_default, set_config
from .errors import (
    InconclusiveError,
    PreconditionError,
    ProblemInputError,
    ProblemSyntaxError,
    SubregError,
)
from .logger import LogContext, configure_logging_system, get_logger

__all__ = [
    "get_logger",
    "LogContext",
    "configure_logging_system",
    "set_config",
    "get_config",
    "get_config_or_default",
    "clear_config",
    "SubregError",
    "ProblemInputError",
    "ProblemSyntaxError",
    "PreconditionError",
    "InconclusiveError",
]
