from __future__ import annotations

from typing import Any, Optional


class DatasetError(Exception):
    """Raised when a generator or loader cannot produce a valid dataset."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
