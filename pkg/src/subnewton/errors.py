"""Shared error types for solver runs."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .trace import TraceRecord

__all__ = ["NumericsError"]


class NumericsError(RuntimeError):
    """A run produced non-finite numbers; carries the trace up to the failure."""

    def __init__(self, message: str, records: "list[TraceRecord] | None" = None):
        super().__init__(message)
        self.records = records or []
