"""Diagnostics and error types shared across the pipeline."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    """Half-open byte range plus the 1-based line/column of its start."""

    line: int
    column: int
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("span start must not exceed end")


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: SourceSpan | None = None
    path: str | None = None

    def __post_init__(self):
        if self.severity not in ("error", "warning"):
            raise ValueError(f"unknown severity {self.severity!r}")

    def render(self) -> str:
        where = ""
        if self.span is not None:
            where = f" at line {self.span.line}, column {self.span.column}"
        elif self.path is not None:
            where = f" at {self.path}"
        return f"{self.severity}[{self.code}]{where}: {self.message}"


def has_errors(diags) -> bool:
    return any(d.severity == "error" for d in diags)


class EmacError(Exception):
    """Base class for pipeline failures."""


class ParseError(EmacError):
    """Syntax or range failure while parsing expression/script text."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.render())
        self.diagnostic = diagnostic


class DocumentError(EmacError):
    """Structured document failed schema or semantic validation."""

    def __init__(self, diagnostics):
        diags = list(diagnostics)
        super().__init__("; ".join(d.render() for d in diags) or "invalid document")
        self.diagnostics = diags


class ResourceLimitError(EmacError):
    """Configured capacity exceeded (pattern space, enumeration size, expansion cap)."""
