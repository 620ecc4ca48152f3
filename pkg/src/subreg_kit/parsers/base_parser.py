"""
Block-structured text parsing shared by the input readers.
"""

import re
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

from subreg_kit.utils.core.config_registry import get_config_or_default, set_config
from subreg_kit.utils.core.errors import ProblemSyntaxError
from subreg_kit.utils.core.logger import get_logger


class BaseParser(ABC):
    """
    Line-oriented parser over `key: value` headers and named blocks.

    `#` starts a comment. A line equal to one of `_sections` opens that block;
    the lines after it go to `parse_<block>` until the next block opens. Header
    lines are only recognised for keys listed in `_header_keys`. Subclasses
    collect state in their handlers and build the result in `finalize`.
    """

    _sections: list[str] = []
    _header_keys: tuple[str, ...] = ()

    def __init__(self, config=None, source_name: str = "<string>"):
        self._current_section = ""
        # (line number, column offset, stripped content)
        self._lines: list[tuple[int, int, str]] = []
        self._line_index = 0
        self.source_name = source_name

        if config is not None:
            self.config = config
            set_config(config)
        else:
            self.config = get_config_or_default()

        self.logger = get_logger(self.__class__.__module__)

    @staticmethod
    def handler_name(section: str) -> str:
        """`control_ineq:` -> `parse_control_ineq`."""
        slug = re.sub(r"[^a-z0-9]+", "_", section.lower()).strip("_")
        return f"parse_{slug}" if slug else "parse_default"

    def syntax_error(self, message: str, column: int = 1) -> ProblemSyntaxError:
        """A syntax error at `column` (1-based) of the stripped current line."""
        line_no, offset, _ = self._lines[self._line_index] if self._lines else (0, 0, "")
        return ProblemSyntaxError(message, line_no, offset + column, self.source_name)

    def parse(self, text: str) -> None:
        """Feed `text` through the header and block handlers.

        Raises:
            ProblemSyntaxError: On malformed input.
        """
        self._lines = self.read_input_lines(text)
        self._line_index = 0
        self._current_section = ""

        for self._line_index, (_, _, line) in enumerate(self._lines):
            if line in self._sections:
                self.handle_section_change(line)
            elif self._is_header(line):
                key, _, value = line.partition(":")
                self.parse_header(key.strip().lower(), value.strip())
            elif self._current_section:
                handler = getattr(self, self.handler_name(self._current_section), None)
                (handler or self.parse_default)(line)
            else:
                self.parse_default(line)

    def _is_header(self, line: str) -> bool:
        key, sep, _ = line.partition(":")
        return bool(sep) and key.strip().lower() in self._header_keys

    def parse_header(self, key: str, value: str) -> None:
        raise self.syntax_error(f"Unexpected header '{key}'")

    def parse_default(self, line: str) -> None:
        raise self.syntax_error(f"Unexpected line outside any block: '{line}'")

    def handle_section_change(self, new_section: str) -> None:
        self._current_section = new_section

    def read_input_lines(self, text: str) -> list[tuple[int, int, str]]:
        """Significant lines of `text` with comments and blank lines removed."""
        lines = []
        for number, raw in enumerate(text.splitlines(), start=1):
            content = raw.split("#", 1)[0].rstrip()
            stripped = content.lstrip()
            if stripped:
                lines.append((number, len(content) - len(stripped), stripped))
        self.logger.debug(f"Read {len(lines)} significant lines from {self.source_name}")
        return lines

    def run(self, path: Path) -> Any:
        """Parse the file at `path` and return the finalized result.

        Raises:
            FileNotFoundError: If the input file does not exist.
        """
        path = Path(path)
        if not path.exists():
            self.logger.error(f"Input file not found: {path}")
            raise FileNotFoundError(f"Input file not found: {path}")
        self.source_name = str(path)
        self.parse(path.read_text(encoding="utf-8"))
        return self.finalize()

    @abstractmethod
    def finalize(self) -> Any:
        """Validate the collected blocks and build the parse result."""
