"""Concept-space test-time training laboratory (Python bindings)."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, ConfigError, DataError, NumericError, SuplabError  # noqa: F401
