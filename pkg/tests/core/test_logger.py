import logging

import numpy as np
import orjson

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.logger import (
    RUN_LOG_NAME,
    JSONFormatter,
    LogContext,
    configure_logging_system,
    get_logger,
)


def test_module_loggers_share_the_package_handlers():
    logger = get_logger("subreg_kit.utils.services.cone_service")
    assert logger.parent is logging.getLogger("subreg_kit")
    assert get_logger("scratch").name == "subreg_kit.scratch"


def test_json_formatter_serializes_numpy_extras():
    record = logging.makeLogRecord(
        {"name": "subreg_kit.test", "msg": "c0 %s", "args": (2.0,), "levelname": "INFO"}
    )
    record.witness = np.array([1.0, -0.5])
    record.c0 = np.float64(2.0)
    payload = orjson.loads(JSONFormatter().format(record))
    assert payload["message"] == "c0 2.0"
    assert payload["witness"] == [1.0, -0.5]
    assert payload["c0"] == 2.0


def test_run_log_written_and_cleared(tmp_path):
    log_dir = tmp_path / "logs"
    config = SubregConfig(
        logging_level="INFO",
        logging_format="json",
        logging_log_dir=str(log_dir),
        logging_clear_on_run=True,
    )
    configure_logging_system(config)
    logger = get_logger("subreg_kit.test_logger")
    with LogContext(logger, "probe") as context:
        pass
    assert context.elapsed_ms is not None
    for handler in logging.getLogger("subreg_kit").handlers:
        handler.flush()
    lines = (log_dir / RUN_LOG_NAME).read_text(encoding="utf-8").splitlines()
    completed = orjson.loads(lines[-1])
    assert completed["message"].startswith("Completed probe")
    assert completed["duration_ms"] >= 0.0

    configure_logging_system(config)
    assert not (log_dir / RUN_LOG_NAME).exists() or (log_dir / RUN_LOG_NAME).stat().st_size == 0
    configure_logging_system(SubregConfig())


def test_log_context_reports_failures(tmp_path):
    configure_logging_system(SubregConfig(logging_log_dir=str(tmp_path), logging_level="ERROR"))
    logger = get_logger("subreg_kit.test_logger")
    try:
        with LogContext(logger, "doomed"):
            raise RuntimeError("boom")
    except RuntimeError:
        pass
    for handler in logging.getLogger("subreg_kit").handlers:
        handler.flush()
    text = (tmp_path / RUN_LOG_NAME).read_text(encoding="utf-8")
    assert "Failed doomed: boom" in text
    configure_logging_system(SubregConfig())
