"""
Logging for subreg-kit.

Every module logger is a child of the ``subreg_kit`` package logger, which owns
the handlers: a console handler on stderr (reports go to stdout) and, when a log
directory is configured, one rotating run log. Records can be rendered as JSON
lines; numpy scalars and arrays passed through ``extra`` serialize natively.
"""

import logging
import shutil
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Optional

import orjson

PACKAGE_LOGGER = "subreg_kit"
RUN_LOG_NAME = "subreg_kit.log"


@dataclass
class _LogSettings:
    level: str = "WARNING"
    json: bool = False
    log_dir: Optional[Path] = None
    max_bytes: int = 10 * 1024 * 1024
    backup_count: int = 5
    colors: bool = True


_settings = _LogSettings()
_installed = False

# Attributes every LogRecord carries; anything else arrived through `extra`
_RECORD_FIELDS = frozenset(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JSONFormatter(logging.Formatter):
    """One JSON object per record, with `extra` fields merged in."""

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "function": record.funcName,
            "line": record.lineno,
        }
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        payload.update({k: v for k, v in vars(record).items() if k not in _RECORD_FIELDS})
        return orjson.dumps(
            payload, default=str, option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS
        ).decode()


class ColoredConsoleFormatter(logging.Formatter):
    COLORS = {
        "DEBUG": "\033[36m",
        "INFO": "\033[32m",
        "WARNING": "\033[33m",
        "ERROR": "\033[31m",
        "CRITICAL": "\033[35m",
    }
    RESET = "\033[0m"

    def format(self, record: logging.LogRecord) -> str:
        shown = logging.makeLogRecord(vars(record))
        shown.levelname = f"{self.COLORS.get(shown.levelname, '')}{shown.levelname}{self.RESET}"
        return super().format(shown)


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever sys.stderr is at emit time."""

    @property  # type: ignore[override]
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value) -> None:
        pass


def _console_handler() -> logging.Handler:
    handler = _StderrHandler()
    fmt = "%(levelname)s - %(name)s - %(message)s"
    if _settings.json:
        handler.setFormatter(JSONFormatter())
    elif _settings.colors and sys.stderr.isatty():
        handler.setFormatter(ColoredConsoleFormatter(fmt=fmt))
    else:
        handler.setFormatter(logging.Formatter(fmt=fmt))
    return handler


def _file_handler(log_dir: Path) -> logging.Handler:
    log_dir.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(
        log_dir / RUN_LOG_NAME,
        maxBytes=_settings.max_bytes,
        backupCount=_settings.backup_count,
        encoding="utf-8",
    )
    if _settings.json:
        handler.setFormatter(JSONFormatter())
    else:
        handler.setFormatter(
            logging.Formatter(
                fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
                datefmt="%Y-%m-%d %H:%M:%S",
            )
        )
    return handler


def _install_handlers() -> None:
    global _installed
    root = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(root.handlers):
        handler.close()
        root.removeHandler(handler)

    level = getattr(logging, _settings.level.upper(), logging.WARNING)
    root.setLevel(level)
    root.propagate = False
    root.addHandler(_console_handler())
    if _settings.log_dir is not None:
        root.addHandler(_file_handler(_settings.log_dir))
    _installed = True


def configure_logging_system(config: Any) -> None:
    """Apply the ``logging_*`` settings of a SubregConfig to the package logger.

    Safe to call repeatedly; existing handlers are closed and replaced.
    """
    _settings.level = config.logging_level.upper()
    _settings.json = config.logging_format == "json"
    _settings.log_dir = Path(config.logging_log_dir) if config.logging_log_dir else None
    _settings.max_bytes = config.logging_max_log_size_mb * 1024 * 1024
    _settings.backup_count = config.logging_backup_count
    _settings.colors = config.logging_console_colors

    if config.logging_clear_on_run and _settings.log_dir is not None:
        for handler in list(logging.getLogger(PACKAGE_LOGGER).handlers):
            if isinstance(handler, logging.FileHandler):
                handler.close()
        if _settings.log_dir.exists():
            try:
                shutil.rmtree(_settings.log_dir)
            except OSError as e:
                print(
                    f"[Logger] Warning: could not clear {_settings.log_dir}: {e}",
                    file=sys.stderr,
                )

    _install_handlers()


def get_logger(name: str) -> logging.Logger:
    """Logger for a module; `name` is normally ``__name__``.

    Names outside the package are nested under it so they share its handlers.
    """
    if not _installed:
        _install_handlers()
    if name != PACKAGE_LOGGER and not name.startswith(f"{PACKAGE_LOGGER}."):
        name = f"{PACKAGE_LOGGER}.{name}"
    return logging.getLogger(name)


class LogContext:
    """Log the start, completion and duration of one analysis step."""

    def __init__(self, logger: logging.Logger, operation: str, level: int = logging.INFO):
        self.logger = logger
        self.operation = operation
        self.level = level
        self.started: Optional[float] = None

    @property
    def elapsed_ms(self) -> Optional[float]:
        if self.started is None:
            return None
        return (time.perf_counter() - self.started) * 1000.0

    def __enter__(self) -> "LogContext":
        self.started = time.perf_counter()
        self.logger.log(self.level, f"Starting {self.operation}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        duration_ms = self.elapsed_ms
        if exc_type is None:
            self.logger.log(
                self.level,
                f"Completed {self.operation} in {duration_ms:.1f} ms",
                extra={"duration_ms": duration_ms},
            )
        else:
            self.logger.error(
                f"Failed {self.operation}: {exc_val}",
                exc_info=(exc_type, exc_val, exc_tb),
                extra={"duration_ms": duration_ms},
            )
        return False
