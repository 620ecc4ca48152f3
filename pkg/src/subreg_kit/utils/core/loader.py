"""
Loading SubregConfig from YAML or JSON files.
"""

from pathlib import Path
from typing import Any, Optional, Union

import orjson
import yaml
from dacite import Config, DaciteError, from_dict

from subreg_kit.config import SubregConfig
from subreg_kit.utils.core.logger import get_logger

logger = get_logger(__name__)


class ConfigLoader:
    """Reads config files into SubregConfig with strict field checking."""

    # PyYAML reads exponents without a dot ("1e-7") as strings, hence the float hook
    _dacite_config = Config(
        strict=True,
        cast=[tuple, Path],
        type_hooks={float: float},
    )

    @staticmethod
    def load_mapping(path: Union[str, Path]) -> dict[str, Any]:
        """Parse a .yaml/.yml or .json file into a dict.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: If the file is malformed or not a mapping.
        """
        path = Path(path)
        logger.debug(f"Loading config file: {path}")
        raw = path.read_bytes()
        if path.suffix.lower() in (".yaml", ".yml"):
            try:
                data = yaml.safe_load(raw)
            except yaml.YAMLError as e:
                raise ValueError(f"Invalid YAML in {path}: {e}") from e
        else:
            try:
                data = orjson.loads(raw)
            except orjson.JSONDecodeError as e:
                raise ValueError(f"Invalid JSON in {path}: {e}") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ValueError(f"{path} must contain a mapping, got {type(data).__name__}")
        return data

    @classmethod
    def from_mapping(
        cls, data: dict[str, Any], overrides: Optional[dict[str, Any]] = None
    ) -> SubregConfig:
        """Build a SubregConfig from `data` with `overrides` applied on top.

        Raises:
            ValueError: On unknown keys, wrong types or invalid values.
        """
        merged = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
        try:
            return from_dict(data_class=SubregConfig, data=merged, config=cls._dacite_config)
        except DaciteError as e:
            raise ValueError(f"Invalid configuration: {e}") from e

    @classmethod
    def load_config(
        cls, path: Optional[Union[str, Path]] = None, overrides: Optional[dict[str, Any]] = None
    ) -> SubregConfig:
        """Config from an optional file plus CLI overrides (None values are ignored)."""
        data = cls.load_mapping(path) if path is not None else {}
        config = cls.from_mapping(data, overrides)
        if path is not None:
            logger.info(f"Loaded configuration from {path}")
        return config
