"""Scope contexts: variable layers plus the accumulated invariant conjuncts.

A statement position is addressed by a path: (process_label, i, sel, j, ...)
where plain ints index flattened block actions and selectors are
("then", k) / ("else",) / ("loop",) / ("block",) for descending into
branches, loop bodies and begin-end bodies.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ScopeError
from .expr import Node
from .model import EventBMachine, ProcessDef, SlpModel
from .stmt import BeginEnd, If, InvariantDef, Statement, While, seq_items
from .typecheck import TypeInfo


@dataclass(frozen=True)
class ScopeLayer:
    kind: str  # globals | locals | block
    vars: tuple[str, ...]


@dataclass(frozen=True)
class ScopeContext:
    layers: tuple[ScopeLayer, ...]
    conjuncts: tuple[tuple[str, Node], ...]  # labelled invariant conjuncts, model order
    types: tuple[tuple[str, tuple], ...]  # var name -> type, sorted by name

    @property
    def all_vars(self) -> tuple[str, ...]:
        """In-scope variable names in enumeration order (sorted)."""
        return tuple(name for name, _ in self.types)

    def type_of(self, name: str) -> tuple:
        for n, t in self.types:
            if n == name:
                return t
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, (n, _) in enumerate(self.types):
            if n == name:
                return i
        raise KeyError(name)

    def has_var(self, name: str) -> bool:
        return any(n == name for n, _ in self.types)

    def extended(self, kind: str, var_types: dict[str, tuple],
                 invs: tuple[InvariantDef, ...]) -> "ScopeContext":
        layers = self.layers
        if var_types:
            layers = layers + (ScopeLayer(kind, tuple(sorted(var_types))),)
        types = dict(self.types)
        types.update(var_types)
        conj = self.conjuncts + tuple(
            (i.label, i.pred) for i in invs if i.kind == "invariant")
        return ScopeContext(layers, conj,
                            tuple(sorted(types.items(), key=lambda kv: kv[0])))

    def outer_vars(self) -> tuple[str, ...]:
        """Variables visible outside the innermost layer."""
        if len(self.layers) <= 1:
            return ()
        keep = set()
        for layer in self.layers[:-1]:
            keep.update(layer.vars)
        return tuple(n for n, _ in self.types if n in keep)


def _var_types(names: tuple[str, ...], table: dict[str, tuple]) -> dict[str, tuple]:
    return {n: table.get(n, ("int",)) for n in names}


def model_scope(model: SlpModel, info: TypeInfo) -> ScopeContext:
    """The global layer: axioms and model invariants over the globals."""
    conj = tuple((a.label, a.pred) for a in model.context.axioms)
    conj += tuple((i.label, i.pred) for i in model.invariants
                  if i.kind == "invariant")
    types = _var_types(model.globals, info.globals)
    return ScopeContext((ScopeLayer("globals", tuple(sorted(model.globals))),),
                        conj, tuple(sorted(types.items(), key=lambda kv: kv[0])))


def process_scope(model: SlpModel, proc: ProcessDef, info: TypeInfo) -> ScopeContext:
    base = model_scope(model, info)
    local_types = _var_types(proc.locals, info.process_locals.get(proc.label, {}))
    return base.extended("locals", local_types, proc.invariants)


def machine_scope(model: SlpModel, machine: EventBMachine,
                  info: TypeInfo) -> ScopeContext:
    conj = tuple((a.label, a.pred) for a in model.context.axioms)
    conj += tuple((i.label, i.pred) for i in machine.invariants)
    table = dict(info.globals)
    table.update(info.machine_vars)
    types = _var_types(machine.variables, table)
    return ScopeContext((ScopeLayer("globals", tuple(sorted(machine.variables))),),
                        conj, tuple(sorted(types.items(), key=lambda kv: kv[0])))


def push_loop(scope: ScopeContext, loop: While) -> ScopeContext:
    return scope.extended("block", {}, loop.invariants)


def push_block(scope: ScopeContext, block: BeginEnd,
               info: TypeInfo) -> ScopeContext:
    table = info.block_locals.get(id(block), {})
    local_types = _var_types(block.locals, table)
    return scope.extended("block", local_types, block.invariants)


def statement_at(model: SlpModel, path: tuple) -> Statement:
    scope, stmt = resolve_path(model, path, infer=None)
    return stmt


def resolve_path(model: SlpModel, path: tuple, infer: TypeInfo | None):
    """Return (ScopeContext, Statement) at a path; raises no-such-position."""
    from .typecheck import infer_types

    info = infer if infer is not None else infer_types(model)
    if not path:
        raise ScopeError("no-such-position", "empty path")
    try:
        proc = model.process(path[0])
    except KeyError:
        raise ScopeError("no-such-position", f"no process {path[0]!r}") from None
    if proc.body is None:
        raise ScopeError("no-such-position", f"process {path[0]!r} has no body")
    scope = process_scope(model, proc, info)
    stmt: Statement = proc.body
    walked: tuple = (proc.label,)
    steps = list(path[1:])
    if not steps:
        return scope, stmt
    while steps:
        step = steps.pop(0)
        if isinstance(step, int):
            items = seq_items(stmt)
            if not 0 <= step < len(items):
                raise ScopeError("no-such-position",
                                 f"index {step} out of range at {walked}")
            stmt = items[step]
            walked = walked + (step,)
            continue
        sel = step[0] if isinstance(step, tuple) else step
        if sel == "then" and isinstance(stmt, If):
            k = step[1]
            if not 0 <= k < len(stmt.branches):
                raise ScopeError("no-such-position", f"no branch {k} at {walked}")
            stmt = stmt.branches[k][1]
        elif sel == "else" and isinstance(stmt, If) and stmt.else_body is not None:
            stmt = stmt.else_body
        elif sel == "loop" and isinstance(stmt, While):
            scope = push_loop(scope, stmt)
            stmt = stmt.body
        elif sel == "block" and isinstance(stmt, BeginEnd):
            scope = push_block(scope, stmt, info)
            stmt = stmt.body
        else:
            raise ScopeError("no-such-position", f"bad step {step!r} at {walked}")
        walked = walked + (step if isinstance(step, tuple) else (sel,),)
    return scope, stmt


def scope_chain(model: SlpModel, path: tuple,
                infer: TypeInfo | None = None) -> ScopeContext:
    scope, _ = resolve_path(model, path, infer)
    return scope
