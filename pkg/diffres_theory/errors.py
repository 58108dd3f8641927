from __future__ import annotations

from typing import Any, Optional


class TheoryError(Exception):
    """Raised when a dataset violates the hypotheses a theory check depends on."""

    def __init__(self, message: str, payload: Optional[Any] = None):
        self.payload = payload
        super().__init__(message)
