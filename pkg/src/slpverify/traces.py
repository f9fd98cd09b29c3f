"""Bounded trace extraction and refinement checking.

Machine traces: label sequences of event executions from the initialisation,
restricted to a chosen event set E (non-E events interleave but are dropped
from the record); `depth` bounds the total number of executed events.

Process traces: label sequences of the body's substitution steps, one body
pass, no rely interference.  In the default serial mode a parallel
substitution emits its part labels as consecutive singleton elements in
declaration order; atomic mode emits one multi-label element.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .errors import EvalError, ExecutionError, SlpError
from .kernel import type_domain
from .model import EventBMachine, ProcessDef, SlpModel
from .scopes import ScopeContext, machine_scope, process_scope, push_block
from .semantics import Interpreter, while_exit_pred
from .session import Session
from .stmt import (Assert, BeginEnd, If, Statement, Stop, Sub, While,
                   seq_items)

Trace = tuple[str, ...]


@dataclass(frozen=True)
class TraceVerdict:
    ok: bool
    counterexample: Optional[Trace] = None
    reason: str = ""


def _initial_states(session: Session, init: Sub, scope: ScopeContext,
                    invariant_filter: bool = True) -> list[tuple]:
    """Evaluate an initialisation; rhs are closed, so any seed state works."""
    interp = Interpreter(session)
    plan = interp._sub_plan(init, scope)
    seed = tuple(0 for _ in scope.all_vars)
    states = plan.successors(seed)
    if not invariant_filter:
        return states
    comp = session.compiler(scope)
    filters = []
    for _, pred in scope.conjuncts:
        filters.append(comp.compile(pred))
    out = []
    for st in states:
        ok = True
        for f in filters:
            try:
                if not f(st, None, []):
                    ok = False
                    break
            except EvalError:
                ok = False
                break
        if ok:
            out.append(st)
    return out


def machine_traces(session: Session, machine: EventBMachine,
                   events: frozenset[str], depth: int) -> set[Trace]:
    scope = machine_scope(session.model, machine, session.info)
    comp = session.compiler(scope)
    interp = Interpreter(session)
    plans = [(ev.label,
              comp.compile(ev.guard) if ev.guard is not None else None,
              interp._sub_plan(ev.action, scope))
             for ev in machine.events]
    initial = _initial_states(session, machine.initialisation, scope)
    traces: set[Trace] = {()}
    visited: set = {((), st) for st in initial}
    frontier: list[tuple[Trace, tuple]] = [((), st) for st in initial]
    for _ in range(depth):
        nxt: list[tuple[Trace, tuple]] = []
        for trace, st in frontier:
            for label, guard, plan in plans:
                if guard is not None:
                    try:
                        if not guard(st, None, []):
                            continue
                    except EvalError:
                        continue
                try:
                    succ = plan.successors(st)
                except EvalError:
                    continue
                new_trace = trace + (label,) if label in events else trace
                for s2 in succ:
                    key = (new_trace, s2)
                    if key in visited:
                        continue
                    visited.add(key)
                    traces.add(new_trace)
                    nxt.append((new_trace, s2))
        if not nxt:
            break
        frontier = nxt
    return traces


# --- process side -----------------------------------------------------------

def _labels_of(sub: Sub) -> list[str]:
    labels = []
    for part in sub.parts:
        if not part.label:
            raise SlpError("unlabeled-substitution",
                           "trace extraction requires labels on every "
                           "substitution part")
        labels.append(part.label)
    return labels


_DONE = ("done",)


class _ProcRunner:
    def __init__(self, session: Session, proc: ProcessDef, atomic: bool):
        self.session = session
        self.interp = Interpreter(session)
        self.proc = proc
        self.atomic = atomic

    def _frame_block(self, body: Statement, scope: ScopeContext) -> tuple:
        return ("block", tuple(seq_items(body)), 0, scope)

    def _cont_key(self, cont: tuple) -> tuple:
        out = []
        for fr in cont:
            if fr[0] == "block":
                out.append(("b", tuple(id(s) for s in fr[1]), fr[2], id(fr[3])))
            elif fr[0] == "loop":
                out.append(("l", id(fr[1]), id(fr[2])))
            else:
                out.append(("p", id(fr[1]), fr[2]))
        return tuple(out)

    def steps(self, cont: tuple, state: tuple):
        """Advance to the next emission or completion.

        Yields (labels, new_cont, new_state); labels is () for silent
        progress and the configuration _DONE marks completion.
        """
        while True:
            if not cont:
                yield ((), _DONE, state)
                return
            frame, rest = cont[0], cont[1:]
            kind = frame[0]
            if kind == "project":
                _, outer_scope, sel = frame
                state = tuple(state[i] for i in sel)
                cont = rest
                continue
            if kind == "loop":
                _, stmt, scope = frame
                comp = self.session.compiler(scope)
                if Interpreter._guard_true(comp, stmt.cond, state):
                    cont = (self._frame_block(stmt.body, scope),) + cont
                else:
                    cont = rest
                continue
            _, items, idx, scope = frame
            if idx >= len(items):
                cont = rest
                continue
            stmt = items[idx]
            advanced = (("block", items, idx + 1, scope),) + rest
            if isinstance(stmt, Sub):
                labels = _labels_of(stmt)
                try:
                    succ = self.interp.sub_successors(stmt, scope, state)
                except EvalError:
                    return
                emit = (tuple(labels),) if self.atomic else tuple(labels)
                for s2 in succ:
                    yield (emit, advanced, s2)
                return
            if isinstance(stmt, Stop):
                yield ((), _DONE, state)
                return
            if isinstance(stmt, Assert):
                comp = self.session.compiler(scope)
                from .semantics import assert_conjunction
                if not Interpreter._guard_true(comp, assert_conjunction(stmt),
                                               state):
                    raise ExecutionError("assert-failed",
                                         "assertion violated during trace run")
                cont = advanced
                continue
            if isinstance(stmt, If):
                comp = self.session.compiler(scope)
                chosen = None
                for cond, body in stmt.branches:
                    if Interpreter._guard_true(comp, cond, state):
                        chosen = body
                        break
                if chosen is None:
                    chosen = stmt.else_body
                if chosen is None:
                    cont = advanced
                else:
                    cont = (self._frame_block(chosen, scope),) + advanced
                continue
            if isinstance(stmt, While):
                cont = (("loop", stmt, scope),) + advanced
                continue
            if isinstance(stmt, BeginEnd):
                inner_scope = push_block(scope, stmt, self.session.info)
                inner_vars = inner_scope.all_vars
                outer_index = {v: i for i, v in enumerate(scope.all_vars)}
                sel_back = tuple(inner_vars.index(v) for v in scope.all_vars)
                comp = self.session.compiler(inner_scope)
                from .expr import conj
                bi = conj(*[i.pred for i in stmt.invariants
                            if i.kind == "invariant"])
                bif = comp.compile(bi)
                domains = [type_domain(inner_scope.type_of(w),
                                       self.session.interp,
                                       self.session.options.state_cap)
                           for w in stmt.locals]
                local_pos = {w: inner_vars.index(w) for w in stmt.locals}
                import itertools as _it
                for combo in _it.product(*domains):
                    ist = [state[outer_index[v]] if v in outer_index else None
                           for v in inner_vars]
                    for w, v in zip(stmt.locals, combo):
                        ist[local_pos[w]] = v
                    tist = tuple(ist)
                    try:
                        if not bif(tist, None, []):
                            continue
                    except EvalError:
                        continue
                    inner_cont = (self._frame_block(stmt.body, inner_scope),
                                  ("project", scope, sel_back)) + advanced
                    yield ((), inner_cont, tist)
                return
            raise SlpError("unsupported-construct",
                           f"cannot trace statement {type(stmt).__name__}")


def process_traces(session: Session, proc: ProcessDef, depth: int,
                   atomic: bool = False) -> set[Trace]:
    if proc.body is None:
        return {()}
    model = session.model
    if model.initialisation is None:
        raise SlpError("no-init", "trace extraction requires INITIALISATION")
    scope = process_scope(model, proc, session.info)
    base = _initial_states(session, model.initialisation,
                           _globals_scope(session), invariant_filter=True)
    initial = _extend_with_locals(session, scope, base)
    runner = _ProcRunner(session, proc, atomic)
    traces: set[Trace] = {()}
    start = runner._frame_block(proc.body, scope)
    queue = deque(((), (start,), st) for st in initial)
    visited = {((), runner._cont_key((start,)), st) for st in initial}
    while queue:
        trace, cont, st = queue.popleft()
        if cont == _DONE:
            continue
        for labels, cont2, st2 in runner.steps(cont, st):
            new_trace = trace
            cut = False
            for label in labels:
                if len(new_trace) >= depth:
                    cut = True
                    break
                new_trace = new_trace + (label,)
                traces.add(new_trace)
            if cut:
                continue
            if cont2 == _DONE:
                continue
            key = (new_trace, runner._cont_key(cont2), st2)
            if key not in visited:
                visited.add(key)
                queue.append((new_trace, cont2, st2))
    return traces


def _globals_scope(session: Session) -> ScopeContext:
    from .scopes import model_scope
    return model_scope(session.model, session.info)


def _extend_with_locals(session: Session, scope: ScopeContext,
                        base: list[tuple]) -> list[tuple]:
    """Lift global initial states into the process scope; locals range freely."""
    gvars = _globals_scope(session).all_vars
    if scope.all_vars == gvars:
        return base
    import itertools as _it
    comp = session.compiler(scope)
    filters = [comp.compile(p) for _, p in scope.conjuncts]
    gpos = {v: i for i, v in enumerate(gvars)}
    locals_ = [v for v in scope.all_vars if v not in gpos]
    domains = [type_domain(scope.type_of(v), session.interp,
                           session.options.state_cap) for v in locals_]
    lpos = {v: i for i, v in enumerate(locals_)}
    out = []
    for g in base:
        for combo in _it.product(*domains):
            st = tuple(g[gpos[v]] if v in gpos else combo[lpos[v]]
                       for v in scope.all_vars)
            ok = True
            for f in filters:
                try:
                    if not f(st, None, []):
                        ok = False
                        break
                except EvalError:
                    ok = False
                    break
            if ok:
                out.append(st)
    return out


# --- refinement checks ---------------------------------------------------------

def check_inclusion(session: Session, proc: ProcessDef,
                    machine: EventBMachine, events: frozenset[str],
                    alphabet_map: dict[str, str], depth: int,
                    atomic: bool = False) -> TraceVerdict:
    """f(tr(P)) within tr(M) restricted to E; counterexample is shortest."""
    ptraces = process_traces(session, proc, depth, atomic)
    mapped: set[Trace] = set()
    for tr in ptraces:
        out = []
        for element in tr:
            if isinstance(element, tuple):
                out.append(tuple(_map_label(alphabet_map, x) for x in element))
            else:
                out.append(_map_label(alphabet_map, element))
        mapped.add(tuple(out))
    if atomic:
        raise SlpError("unsupported-construct",
                       "atomic-mode inclusion needs multi-event machine steps")
    mtraces = machine_traces(session, machine, events, depth)
    offending = sorted((t for t in mapped if t not in mtraces),
                       key=lambda t: (len(t), t))
    if offending:
        return TraceVerdict(False, offending[0],
                            "mapped process trace is not a machine trace")
    return TraceVerdict(True)


def _map_label(alphabet_map: dict[str, str], label: str) -> str:
    if label not in alphabet_map:
        raise SlpError("refmap-incomplete",
                       f"substitution label {label!r} has no REFMAP entry")
    return alphabet_map[label]


def check_divergence(session: Session, proc: ProcessDef) -> TraceVerdict:
    """Discharged iff every loop's variant obligation holds (loops are the
    only cycle construct)."""
    if proc.body is None:
        return TraceVerdict(True)
    interp = Interpreter(session)
    scope = process_scope(session.model, proc, session.info)
    failures: list[str] = []

    def walk(stmt: Statement, sc: ScopeContext) -> None:
        from .scopes import push_loop
        for item in seq_items(stmt):
            if isinstance(item, While):
                trm = interp.trm_holds(item, sc)
                if not trm.ok:
                    failures.append(trm.reason or "variant obligation violated")
                walk(item.body, push_loop(sc, item))
            elif isinstance(item, If):
                for _, body in item.branches:
                    walk(body, sc)
                if item.else_body is not None:
                    walk(item.else_body, sc)
            elif isinstance(item, BeginEnd):
                walk(item.body, push_block(sc, item, session.info))

    walk(proc.body, scope)
    if failures:
        return TraceVerdict(False, None, "; ".join(failures))
    return TraceVerdict(True)
