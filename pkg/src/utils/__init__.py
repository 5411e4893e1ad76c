"""
Utility functions and helpers for the mass-operator workbench.
"""

from .logging_utils import setup_logging, close_logging, get_logger, LoggerMixin
from .config_utils import load_config, load_runtime_config, validate_config, create_default_config

__all__ = [
    "setup_logging",
    "close_logging",
    "get_logger",
    "LoggerMixin",
    "load_config",
    "load_runtime_config",
    "validate_config",
    "create_default_config",
]
