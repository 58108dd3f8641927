from __future__ import annotations

from typing import Any, Optional


class DiffusionError(Exception):
    """Raised on shape mismatches or unstable diffusion settings."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
