from __future__ import annotations

from typing import Any, Optional


class ConfigError(Exception):
    """Raised when an experiment config cannot be read or resolved."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
