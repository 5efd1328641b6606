"""Configuration, command dispatch and result emission for the command line."""

from .config import ConfigError, RunConfig, load
from .output import ResultTable

__all__ = ["ConfigError", "ResultTable", "RunConfig", "load"]
