from __future__ import annotations

from typing import Any, Optional


class GraphError(Exception):
    """Raised when a point set or weight matrix violates its contract."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
