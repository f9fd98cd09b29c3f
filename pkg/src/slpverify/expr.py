"""Expression and predicate AST for the implemented mathematical subset.

One unified node hierarchy covers expressions and predicates; predicates
are the bool-typed fraction of it.  Nodes are immutable and compare
structurally (source spans are excluded from equality).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .span import Span

ARITH_OPS = ("+", "-", "*", "div", "mod")
CMP_OPS = ("=", "/=", "<", "<=", ">", ">=")
SET_OPS = ("union", "inter", "diff", "upto", "maplet")
MEMBER_OPS = ("in", "notin", "subset")
LOGIC_OPS = ("and", "or", "=>", "<=>")


@dataclass(frozen=True)
class Node:
    span: Span | None = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class IntLit(Node):
    value: int = 0


@dataclass(frozen=True)
class BoolLit(Node):
    value: bool = False


@dataclass(frozen=True)
class Name(Node):
    """Variable, constant, carrier set or atom reference; primes > 0 marks v', v''."""

    text: str = ""
    primes: int = 0

    @property
    def key(self) -> tuple[str, int]:
        return (self.text, self.primes)


@dataclass(frozen=True)
class BaseSet(Node):
    name: str = "INT"  # INT | NAT | BOOL


@dataclass(frozen=True)
class Unary(Node):
    op: str = "not"  # not | neg
    operand: Node = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Binary(Node):
    op: str = "and"
    left: Node = None  # type: ignore[assignment]
    right: Node = None  # type: ignore[assignment]


@dataclass(frozen=True)
class BoolCast(Node):
    """bool(p): reifies a predicate as a BOOL expression."""

    pred: Node = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Quant(Node):
    kind: str = "forall"  # forall | exists
    names: tuple[str, ...] = ()
    body: Node = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SetLit(Node):
    items: tuple[Node, ...] = ()


@dataclass(frozen=True)
class Apply(Node):
    fn: Node = None  # type: ignore[assignment]
    arg: Node = None  # type: ignore[assignment]


TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conj(*parts: Node) -> Node:
    """Right-folded conjunction; empty becomes TRUE."""
    live = [p for p in parts if p is not None]
    if not live:
        return TRUE
    out = live[-1]
    for p in reversed(live[:-1]):
        out = Binary("and", p, out)
    return out


def conjuncts_of(p: Node) -> list[Node]:
    if isinstance(p, Binary) and p.op == "and":
        return conjuncts_of(p.left) + conjuncts_of(p.right)
    return [p]


def negate(p: Node) -> Node:
    return Unary("not", p)


def free_names(node: Node, bound: frozenset[str] = frozenset()) -> Iterator[tuple[str, int]]:
    """Yield (text, primes) for every free occurrence, left to right."""
    if isinstance(node, Name):
        if node.text not in bound:
            yield node.key
    elif isinstance(node, Unary):
        yield from free_names(node.operand, bound)
    elif isinstance(node, Binary):
        yield from free_names(node.left, bound)
        yield from free_names(node.right, bound)
    elif isinstance(node, BoolCast):
        yield from free_names(node.pred, bound)
    elif isinstance(node, Quant):
        yield from free_names(node.body, bound | set(node.names))
    elif isinstance(node, SetLit):
        for item in node.items:
            yield from free_names(item, bound)
    elif isinstance(node, Apply):
        yield from free_names(node.fn, bound)
        yield from free_names(node.arg, bound)
    # literals and base sets bind nothing


def substitute(node: Node, mapping: dict[str, Node]) -> Node:
    """Replace free unprimed Name occurrences; capture-avoiding via binder renaming."""
    if not mapping:
        return node
    if isinstance(node, Name):
        if node.primes == 0 and node.text in mapping:
            return mapping[node.text]
        return node
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.operand, mapping), span=node.span)
    if isinstance(node, Binary):
        return Binary(node.op, substitute(node.left, mapping),
                      substitute(node.right, mapping), span=node.span)
    if isinstance(node, BoolCast):
        return BoolCast(substitute(node.pred, mapping), span=node.span)
    if isinstance(node, Quant):
        inner = {k: v for k, v in mapping.items() if k not in node.names}
        if not inner:
            return node
        inserted = {t for v in inner.values() for (t, _) in free_names(v)}
        names = list(node.names)
        body = node.body
        renames: dict[str, Node] = {}
        for i, n in enumerate(names):
            if n in inserted:
                fresh = n
                taken = inserted | set(names) | set(inner)
                while fresh in taken:
                    fresh += "_"
                names[i] = fresh
                renames[n] = Name(fresh)
        if renames:
            body = substitute(body, renames)
        return Quant(node.kind, tuple(names), substitute(body, inner), span=node.span)
    if isinstance(node, SetLit):
        return SetLit(tuple(substitute(i, mapping) for i in node.items), span=node.span)
    if isinstance(node, Apply):
        return Apply(substitute(node.fn, mapping), substitute(node.arg, mapping), span=node.span)
    return node


def shift_primes(node: Node, names: frozenset[str], by: int = 1) -> Node:
    """Add `by` primes to free occurrences of the given names (any prime level)."""
    if isinstance(node, Name):
        if node.text in names:
            return Name(node.text, node.primes + by, span=node.span)
        return node
    if isinstance(node, Unary):
        return Unary(node.op, shift_primes(node.operand, names, by), span=node.span)
    if isinstance(node, Binary):
        return Binary(node.op, shift_primes(node.left, names, by),
                      shift_primes(node.right, names, by), span=node.span)
    if isinstance(node, BoolCast):
        return BoolCast(shift_primes(node.pred, names, by), span=node.span)
    if isinstance(node, Quant):
        inner = names - set(node.names)
        if not inner:
            return node
        return Quant(node.kind, node.names, shift_primes(node.body, inner, by), span=node.span)
    if isinstance(node, SetLit):
        return SetLit(tuple(shift_primes(i, names, by) for i in node.items), span=node.span)
    if isinstance(node, Apply):
        return Apply(shift_primes(node.fn, names, by),
                     shift_primes(node.arg, names, by), span=node.span)
    return node


def max_prime(node: Node) -> int:
    return max((p for _, p in free_names(node)), default=0)
