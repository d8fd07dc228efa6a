"""Error type shared by every module.

Each failure carries a stable, machine-readable ``code`` so callers (and the
CLI) can branch on it without parsing messages.
"""

from __future__ import annotations


class BenchAssignError(Exception):
    """Raised on contract violations. ``code`` is stable across releases."""

    def __init__(self, code: str, message: str = "", *, line: int | None = None, findings=()) -> None:
        self.code = code
        self.message = message
        self.line = line
        self.findings = tuple(findings)
        text = code if not message else f"{code}: {message}"
        if line is not None:
            text = f"{text} (line {line})"
        super().__init__(text)
