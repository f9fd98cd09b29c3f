"""Statement and substitution AST for process bodies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .expr import Node
from .span import Span


@dataclass(frozen=True)
class Spanned:
    span: Span | None = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class InvariantDef(Spanned):
    """(INV | TH) label: predicate — used at model, process, loop and block level."""

    kind: str = "invariant"  # invariant | theorem
    label: str = ""
    pred: Node = None  # type: ignore[assignment]


@dataclass(frozen=True)
class NamedPred(Spanned):
    """A labelled predicate: axioms, relies, guarantees, machine invariants."""

    label: str = ""
    pred: Node = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Statement(Spanned):
    """Base class; `notes` records ATOMIC/REFINES/WITH annotations (no semantics)."""

    notes: tuple = field(default=(), kw_only=True)


@dataclass(frozen=True)
class SubPart(Spanned):
    """One clause of a (possibly parallel) substitution.

    kind 'eq' and 'in' have a single target; 'such' allows several targets and
    a before-after predicate as rhs.
    """

    label: Optional[str] = None
    kind: str = "eq"  # eq | in | such
    targets: tuple[str, ...] = ()
    rhs: Node = None  # type: ignore[assignment]

    @property
    def writes(self) -> frozenset[str]:
        return frozenset(self.targets)


@dataclass(frozen=True)
class Sub(Statement):
    """Parallel combination of substitution parts (a single part is the common case)."""

    parts: tuple[SubPart, ...] = ()

    @property
    def writes(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for p in self.parts:
            out |= p.writes
        return out

    @property
    def name(self) -> Optional[str]:
        """Joined part labels when all parts are labelled, else None."""
        if self.parts and all(p.label for p in self.parts):
            return "+".join(p.label for p in self.parts)  # type: ignore[misc]
        return None


@dataclass(frozen=True)
class Seq(Statement):
    """Sequential composition; items may themselves be Seq (flattened on use)."""

    items: tuple[Statement, ...] = ()


@dataclass(frozen=True)
class If(Statement):
    branches: tuple[tuple[Node, Statement], ...] = ()
    else_body: Optional[Statement] = None


@dataclass(frozen=True)
class While(Statement):
    cond: Node = None  # type: ignore[assignment]
    invariants: tuple[InvariantDef, ...] = ()
    variant: Node = None  # type: ignore[assignment]
    body: Statement = None  # type: ignore[assignment]


@dataclass(frozen=True)
class BeginEnd(Statement):
    locals: tuple[str, ...] = ()
    invariants: tuple[InvariantDef, ...] = ()
    body: Statement = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Assert(Statement):
    """Composite assert: one ASSERT with conjuncts chained by &&&."""

    conjuncts: tuple[tuple[Optional[str], Node], ...] = ()


@dataclass(frozen=True)
class Stop(Statement):
    pass


def seq_items(stmt: Statement) -> list[Statement]:
    """Flatten nested Seq nodes into an action list."""
    if isinstance(stmt, Seq):
        out: list[Statement] = []
        for item in stmt.items:
            out.extend(seq_items(item))
        return out
    return [stmt]
