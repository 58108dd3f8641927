from __future__ import annotations

from typing import Any, Optional


class FlowError(Exception):
    """Raised by the network, losses and trainer (shape errors, stale caches, NaN losses)."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
