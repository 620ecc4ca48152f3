"""
Base generator class for writing report files.
"""

import os
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Optional, Sequence

import orjson

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.config_registry import set_config
from subreg_kit.utils.core.logger import get_logger
from subreg_kit.utils.formatters.report_formatter import rows_to_csv, to_jsonable


class BaseGenerator(ABC):
    """
    Abstract base class for report generators.

    Generators turn analysis results into files under one output directory. Every
    file is written to a temporary sibling first and moved into place with
    os.replace, so readers never see a partial report.
    """

    def __init__(self, config: SubregConfig, output_dir: Optional[Path] = None):
        """Initialize the base generator.

        Args:
            config (SubregConfig): Active configuration; registered globally.
            output_dir (Optional[Path], optional): Target directory. Defaults to
                config.output_path.
        """
        self.config = config
        set_config(config)
        self.logger = get_logger(self.__class__.__module__)
        self.output_dir = Path(output_dir) if output_dir is not None else config.output_path
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger.debug(
            f"Initializing generator: {self.__class__.__name__}",
            extra={"output_dir": str(self.output_dir)},
        )

    def write_bytes(self, name: str, data: bytes) -> Path:
        """Atomically write `data` to output_dir / name."""
        target = self.output_dir / name
        fd, temp_name = tempfile.mkstemp(dir=self.output_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(temp_name, target)
        except OSError as e:
            self.logger.error(f"Error writing {target}: {e}", exc_info=True)
            if os.path.exists(temp_name):
                os.unlink(temp_name)
            raise
        self.logger.debug(f"Wrote {target}")
        return target

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_csv(self, name: str, rows: Sequence[Sequence[Any]]) -> Path:
        return self.write_text(name, rows_to_csv(rows))

    def write_json(self, name: str, data: Any) -> Path:
        return self.write_bytes(
            name,
            orjson.dumps(to_jsonable(data), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
            + b"\n",
        )

    @abstractmethod
    def generate(self, *args: Any, **kwargs: Any) -> list[Path]:
        """Write the generator's files and return their paths."""
        raise NotImplementedError("Subclasses must implement generate()")

    def run(self, *args: Any, **kwargs: Any) -> bool:
        """Run generate(), logging instead of raising on file-system errors."""
        try:
            paths = self.generate(*args, **kwargs)
        except OSError as e:
            self.logger.error(f"Generation failed: {e}", exc_info=True)
            return False
        self.logger.info(f"Generated {len(paths)} file(s) in {self.output_dir}")
        return True
