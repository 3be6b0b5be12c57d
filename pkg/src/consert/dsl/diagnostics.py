from __future__ import annotations

import enum
from dataclasses import dataclass


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"

    def __str__(self) -> str:
        return self.value

    def __lt__(self, other: "Severity") -> bool:
        # errors sort before warnings at the same location
        return (self is Severity.ERROR) and (other is Severity.WARNING)


@dataclass(frozen=True, order=True)
class Diagnostic:
    path: str
    line: int
    col: int
    severity: Severity
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: {self.severity} {self.code} {self.message}"

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)


class DslError(Exception):
    """Raised by the loading helpers when a document does not parse or validate."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
