"""Shared errors; configuration lives in ``utils.config_loader``."""
from .errors import ConfigError, ToolkitError

__all__ = ["ConfigError", "ToolkitError"]
