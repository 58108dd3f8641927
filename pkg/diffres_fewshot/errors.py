from __future__ import annotations

from typing import Any, Optional


class FewShotError(Exception):
    """Raised for invalid episodes, empty classes or degenerate feature transforms."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
