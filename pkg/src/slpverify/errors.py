"""Exception types shared across the toolkit."""

from __future__ import annotations

from .span import Span


class SlpError(Exception):
    """Base class; `code` is a stable machine-readable identifier."""

    def __init__(self, code: str, message: str, span: Span | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.span = span

    def __str__(self) -> str:
        loc = f" at {self.span}" if self.span else ""
        return f"{self.code}{loc}: {self.message}"


class ParseError(SlpError):
    """First syntax error; carries the expected-token set."""

    def __init__(self, message: str, span: Span, expected: tuple[str, ...] = ()):
        super().__init__("parse-error", message, span)
        self.expected = expected


class EvalError(SlpError):
    """Raised by the kernel: unbound-name, partial-application, div-by-zero."""


class StateSpaceExceeded(SlpError):
    def __init__(self, size: int, cap: int):
        super().__init__("state-space-exceeded",
                         f"raw state product {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class ScopeError(SlpError):
    """Invalid statement path or out-of-scope reference."""


class ExecutionError(SlpError):
    """Operational executor failures: assert-failed, fuel-exhausted, stuck."""

    def __init__(self, code: str, message: str, witness: dict | None = None):
        super().__init__(code, message)
        self.witness = witness or {}
