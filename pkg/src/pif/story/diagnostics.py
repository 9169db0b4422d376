"""Diagnostics shared by the story parser and linter."""

from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"
INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    col: int
    severity: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: {self.severity}: {self.message}"


class ParseErrors(ValueError):
    """Raised by parse() with every collected error."""

    def __init__(self, errors: list[Diagnostic]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors
