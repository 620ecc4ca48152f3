"""
Process-wide active SubregConfig.

The CLI, generators and parsers register the settings of the current run here;
services given ``config=None`` resolve against it, falling back to defaults.
"""

import threading
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from subreg_kit.config import SubregConfig

_active: Optional["SubregConfig"] = None
_lock = threading.Lock()


def set_config(config: "SubregConfig") -> None:
    """Make `config` the active run settings.

    Example:
        >>> set_config(SubregConfig(seed=3, mesh_n=100))
    """
    global _active
    with _lock:
        _active = config


def get_config() -> "SubregConfig":
    """The active settings.

    Raises:
        RuntimeError: If no run has registered settings yet.
    """
    with _lock:
        if _active is None:
            raise RuntimeError("No active SubregConfig; call set_config() or pass config=")
        return _active


def get_config_or_default() -> "SubregConfig":
    """The active settings, or a fresh default SubregConfig."""
    from subreg_kit.config import SubregConfig

    with _lock:
        return _active if _active is not None else SubregConfig()


def clear_config() -> None:
    global _active
    with _lock:
        _active = None
