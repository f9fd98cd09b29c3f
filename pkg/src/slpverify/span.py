"""Source positions for parse results and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """Half-open byte range [begin, end) with 1-based line/column for both ends."""

    begin: int
    end: int
    line: int
    col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if self.begin > self.end:
            raise ValueError(f"span begin {self.begin} > end {self.end}")

    def merge(self, other: "Span") -> "Span":
        a, b = (self, other) if self.begin <= other.begin else (other, self)
        return Span(a.begin, max(a.end, b.end), a.line, a.col,
                    b.end_line if b.end >= a.end else a.end_line,
                    b.end_col if b.end >= a.end else a.end_col)

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"
