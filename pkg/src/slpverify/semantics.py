"""Relational statement semantics over finite scopes, write sets, and an
operational executor used for cross-validation.

Relations map states of a scope to states-or-termination.  Before states
always satisfy the scope invariants; after states range over the raw typed
domains, so invariant preservation is a real check downstream, not a
construction artifact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import EvalError, ExecutionError
from .expr import Node, conj, negate
from .kernel import StateSpace, type_domain, value_key
from .model import Event
from .scopes import ScopeContext, push_block, push_loop
from .session import Session
from .stmt import (Assert, BeginEnd, If, Statement, Stop, Sub, While,
                   seq_items)


class Terminated:
    """The distinguished absorbing after-state entered by STOP."""

    _instance: Optional["Terminated"] = None

    def __new__(cls) -> "Terminated":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "TERMINATED"


CHECKMARK = Terminated()


class ScopedRelation:
    """A finite relation from scope states to states-or-✓, in a stable order."""

    __slots__ = ("scope", "space", "pairs", "_dom")

    def __init__(self, scope: ScopeContext, space: StateSpace,
                 pairs: Iterable[tuple]):
        self.scope = scope
        self.space = space
        self.pairs: tuple = tuple(pairs)
        self._dom: set | None = None

    def dom(self) -> set:
        if self._dom is None:
            self._dom = {p for p, _ in self.pairs}
        return self._dom

    def pair_set(self) -> frozenset:
        return frozenset(self.pairs)

    def restrict(self, states: Iterable) -> "ScopedRelation":
        keep = states if isinstance(states, (set, frozenset)) else set(states)
        return ScopedRelation(self.scope, self.space,
                              [pq for pq in self.pairs if pq[0] in keep])

    def image(self, states: Iterable) -> list:
        keep = states if isinstance(states, (set, frozenset)) else set(states)
        seen: set = set()
        out: list = []
        for p, q in self.pairs:
            if p in keep and q not in seen:
                seen.add(q)
                out.append(q)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScopedRelation):
            return NotImplemented
        return (self.scope.all_vars == other.scope.all_vars
                and self.pair_set() == other.pair_set())

    def __hash__(self) -> int:  # pragma: no cover - relations rarely hashed
        return hash((self.scope.all_vars, self.pair_set()))

    def __len__(self) -> int:
        return len(self.pairs)


class _SubPlan:
    """Substitution compiled against one scope; shared by relations and executor."""

    __slots__ = ("parts", "all_eq", "strict_union")

    def __init__(self, sub: Sub, scope: ScopeContext, session: Session):
        comp = session.compiler(scope)
        index = {name: i for i, name in enumerate(scope.all_vars)}
        self.parts: list[tuple] = []
        for part in sub.parts:
            idx = tuple(index[t] for t in part.targets)
            fn = comp.compile(part.rhs)
            if part.kind == "such":
                domains = [type_domain(scope.type_of(t), session.interp,
                                       session.options.state_cap)
                           for t in part.targets]
                self.parts.append(("such", idx, fn, domains))
            else:
                self.parts.append((part.kind, idx, fn, None))
        self.all_eq = all(p[0] == "eq" for p in self.parts)
        self.strict_union = (session.options.strict_paper and len(sub.parts) > 1)

    def _choices(self, part: tuple, state: tuple) -> list[tuple]:
        kind, idx, fn, domains = part
        if kind == "eq":
            return [(idx, (fn(state, None, []),))]
        if kind == "in":
            pool = fn(state, None, [])
            if not isinstance(pool, frozenset):
                raise EvalError("unbound-name", "':: E' needs a set value")
            return [(idx, (v,)) for v in sorted(pool, key=value_key)]
        out = []
        for combo in itertools.product(*domains):
            cand = list(state)
            for i, v in zip(idx, combo):
                cand[i] = v
            if fn(state, tuple(cand), []):
                out.append((idx, combo))
        return out

    def successors(self, state: tuple) -> list[tuple]:
        if self.strict_union:
            out: list[tuple] = []
            for part in self.parts:
                for idx, values in self._choices(part, state):
                    nxt = list(state)
                    for i, v in zip(idx, values):
                        nxt[i] = v
                    out.append(tuple(nxt))
            return _dedup_states(out)
        if self.all_eq:
            nxt = list(state)
            for _, idx, fn, _d in self.parts:
                nxt[idx[0]] = fn(state, None, [])
            return [tuple(nxt)]
        per_part = []
        for part in self.parts:
            choices = self._choices(part, state)
            if not choices:
                return []
            per_part.append(choices)
        out = []
        for pick in itertools.product(*per_part):
            nxt = list(state)
            for idx, values in pick:
                for i, v in zip(idx, values):
                    nxt[i] = v
            out.append(tuple(nxt))
        if len(out) == 1:
            return out
        return _dedup_states(out)


def _dedup(pairs: Iterable[tuple]) -> list[tuple]:
    seen: set = set()
    out: list = []
    for pq in pairs:
        if pq not in seen:
            seen.add(pq)
            out.append(pq)
    return out


def diamond(rel: ScopedRelation) -> ScopedRelation:
    """Totalize over the scope's state space: uncovered states map to themselves."""
    dom = rel.dom()
    pairs = list(rel.pairs)
    for st in rel.space.states:
        if st not in dom:
            pairs.append((st, st))
    return ScopedRelation(rel.scope, rel.space, pairs)


def compose(first: ScopedRelation, second: ScopedRelation) -> ScopedRelation:
    """first then second; ✓ on the left absorbs."""
    succ: dict = {}
    for p, q in second.pairs:
        succ.setdefault(p, []).append(q)
    out: list[tuple] = []
    for p, q in first.pairs:
        if q is CHECKMARK:
            out.append((p, CHECKMARK))
        else:
            for r in succ.get(q, ()):
                out.append((p, r))
    return ScopedRelation(first.scope, first.space, _dedup(out))


def assert_conjunction(stmt: Assert) -> Node:
    return conj(*[p for _, p in stmt.conjuncts])


def loop_invariant(stmt: While) -> Node:
    return conj(*[i.pred for i in stmt.invariants if i.kind == "invariant"])


def while_exit_pred(stmt: While) -> Node:
    """The loop's relational reading: its invariant and the negated condition."""
    return conj(negate(stmt.cond), loop_invariant(stmt))


@dataclass(frozen=True)
class TrmResult:
    ok: bool
    reason: str = ""
    witness_pre: Optional[dict] = None
    witness_post: Optional[dict] = None


class Interpreter:
    """Builds relations for statements of one model under one interpretation."""

    def __init__(self, session: Session):
        self.session = session
        self._plans: dict[tuple[int, int], _SubPlan] = {}
        self._plan_refs: list = []  # pins (scope, sub) so ids stay unique

    # substitution successors -------------------------------------------------

    def _sub_plan(self, sub: Sub, scope: ScopeContext) -> "_SubPlan":
        key = (id(scope), id(sub))
        plan = self._plans.get(key)
        if plan is None:
            plan = _SubPlan(sub, scope, self.session)
            self._plans[key] = plan
            self._plan_refs.append((scope, sub))
        return plan

    def sub_successors(self, sub: Sub, scope: ScopeContext, state: tuple) -> list[tuple]:
        """After states of a substitution at one state; [] when infeasible."""
        return self._sub_plan(sub, scope).successors(state)

    def sub_relation(self, sub: Sub, scope: ScopeContext) -> ScopedRelation:
        space = self.session.space(scope)
        plan = self._sub_plan(sub, scope)
        pairs: list[tuple] = []
        for st in space.states:
            try:
                for nxt in plan.successors(st):
                    pairs.append((st, nxt))
            except EvalError:
                continue  # guarded relation: undefined states fall out of the domain
        return ScopedRelation(scope, space, pairs)

    # statement relations -------------------------------------------------------

    def relation(self, stmt: Statement, scope: ScopeContext) -> ScopedRelation:
        key = (scope, id(stmt))
        cached = self.session._relations.get(key)
        if cached is None:
            cached = self._relation(stmt, scope)
            self.session._relations[key] = cached
        return cached  # type: ignore[return-value]

    def _relation(self, stmt: Statement, scope: ScopeContext) -> ScopedRelation:
        space = self.session.space(scope)
        if isinstance(stmt, Stop):
            return ScopedRelation(scope, space,
                                  [(st, CHECKMARK) for st in space.states])
        if isinstance(stmt, Assert):
            states = self.session.sat(scope, assert_conjunction(stmt))
            return ScopedRelation(scope, space,
                                  [(st, st) for st in space.states if st in states])
        if isinstance(stmt, Sub):
            return self.sub_relation(stmt, scope)
        if isinstance(stmt, If):
            return self.if_relation(stmt, scope)
        if isinstance(stmt, While):
            return self.while_relation(stmt, scope)
        if isinstance(stmt, BeginEnd):
            return self.begin_relation(stmt, scope)
        return self.seq_relation(seq_items(stmt), scope)

    def seq_relation(self, items: list[Statement], scope: ScopeContext) -> ScopedRelation:
        """Sequential composition with the forgetful rule at the last assert."""
        if not items:
            space = self.session.space(scope)
            return ScopedRelation(scope, space, [(st, st) for st in space.states])
        cut = None
        for k in range(len(items) - 2, -1, -1):
            if isinstance(items[k], (Assert, While)):
                cut = k
                break
        if cut is not None:
            gate = items[cut]
            if isinstance(gate, Assert):
                states = self.session.sat(scope, assert_conjunction(gate))
            else:
                states = self.exit_states(gate, scope)
            suffix = self.seq_relation(items[cut + 1:], scope)
            return diamond(suffix.restrict(states))
        rel = self.relation(items[0], scope)
        for item in items[1:]:
            rel = compose(rel, self.relation(item, scope))
        return rel

    def if_relation(self, stmt: If, scope: ScopeContext) -> ScopedRelation:
        space = self.session.space(scope)
        covered: set = set()
        pairs: list[tuple] = []
        for cond, body in stmt.branches:
            guard = self.session.sat(scope, cond)
            effective = guard - covered
            covered = covered | guard
            body_rel = self.seq_relation(seq_items(body), scope)
            pairs.extend(pq for pq in body_rel.pairs if pq[0] in effective)
        if stmt.else_body is not None:
            rest = space.members - covered
            body_rel = self.seq_relation(seq_items(stmt.else_body), scope)
            pairs.extend(pq for pq in body_rel.pairs if pq[0] in rest)
        return diamond(ScopedRelation(scope, space, _dedup(pairs)))

    def effective_guards(self, stmt: If, scope: ScopeContext) -> list[frozenset]:
        """Branch guards made disjoint by differencing earlier ones."""
        out = []
        covered: set = set()
        for cond, _ in stmt.branches:
            guard = self.session.sat(scope, cond)
            out.append(frozenset(guard - covered))
            covered |= guard
        if stmt.else_body is not None:
            out.append(frozenset(self.session.space(scope).members - covered))
        return out

    def exit_states(self, stmt: While, scope: ScopeContext) -> frozenset:
        """[¬c ∧ LI] ∩ Σ, emptied when the termination condition fails."""
        trm = self.trm_holds(stmt, scope)
        if not trm.ok:
            return frozenset()
        return self.session.sat(scope, while_exit_pred(stmt))

    def while_relation(self, stmt: While, scope: ScopeContext) -> ScopedRelation:
        space = self.session.space(scope)
        states = self.exit_states(stmt, scope)
        return ScopedRelation(scope, space,
                              [(st, st) for st in space.states if st in states])

    def begin_relation(self, stmt: BeginEnd, scope: ScopeContext) -> ScopedRelation:
        inner_scope = push_block(scope, stmt, self.session.info)
        inner_rel = self.seq_relation(seq_items(stmt.body), inner_scope)
        outer_vars = scope.all_vars
        inner_vars = inner_scope.all_vars
        sel = tuple(inner_vars.index(v) for v in outer_vars)
        pairs: list[tuple] = []
        for p, q in inner_rel.pairs:
            pp = tuple(p[i] for i in sel)
            if q is CHECKMARK:
                pairs.append((pp, CHECKMARK))  # STOP escapes the block
            else:
                pairs.append((pp, tuple(q[i] for i in sel)))
        return diamond(ScopedRelation(scope, self.session.space(scope),
                                      _dedup(pairs)))

    # loops ---------------------------------------------------------------------

    def trm_holds(self, stmt: While, scope: ScopeContext) -> TrmResult:
        cached = self.session._trm.get(id(stmt))
        if cached is None:
            cached = self._trm_holds(stmt, scope)
            self.session._trm[id(stmt)] = cached
        return cached  # type: ignore[return-value]

    def _trm_holds(self, stmt: While, scope: ScopeContext) -> TrmResult:
        inner = push_loop(scope, stmt)
        space = self.session.space(inner)
        st = self.session.sat(inner, stmt.cond)
        comp = self.session.compiler(inner)
        vf = comp.compile(stmt.variant)

        def variant_at(state: tuple) -> int:
            v = vf(state, None, [])
            if isinstance(v, bool) or not isinstance(v, int):
                raise EvalError("variant-not-integer",
                                "variant must evaluate to an integer")
            return v

        pre_values: dict[tuple, int] = {}
        for s in space.states:
            if s in st:
                try:
                    v = variant_at(s)
                except EvalError as e:
                    return TrmResult(False, e.code, space.state_dict(s))
                if v < 0:
                    return TrmResult(False, "variant negative on a loop state",
                                     space.state_dict(s))
                pre_values[s] = v
        body_rel = self.seq_relation(seq_items(stmt.body), inner)
        if self.session.options.strict_paper:
            post_values = []
            for p, q in body_rel.pairs:
                if p in pre_values and q is not CHECKMARK:
                    try:
                        post_values.append((variant_at(q), p, q))
                    except EvalError as e:
                        return TrmResult(False, e.code, space.state_dict(p),
                                         space.state_dict(q))
            if pre_values and post_values:
                worst_post = max(post_values, key=lambda t: t[0])
                least_pre = min(pre_values.items(), key=lambda kv: kv[1])
                if worst_post[0] >= least_pre[1]:
                    return TrmResult(False,
                                     "paper-global variant comparison fails",
                                     space.state_dict(worst_post[1]),
                                     space.state_dict(worst_post[2]))
            return TrmResult(True)
        for p, q in body_rel.pairs:
            if p in pre_values and q is not CHECKMARK:
                try:
                    after = variant_at(q)
                except EvalError as e:
                    return TrmResult(False, e.code, space.state_dict(p),
                                     space.state_dict(q))
                if after >= pre_values[p]:
                    return TrmResult(False, "variant does not decrease",
                                     space.state_dict(p), space.state_dict(q))
        return TrmResult(True)

    # machine events -------------------------------------------------------------

    def event_relation(self, event: Event, scope: ScopeContext) -> ScopedRelation:
        """[guard] ◁ action; disabled outside the guard, never diamond-extended."""
        rel = self.sub_relation(event.action, scope)
        if event.guard is None:
            return rel
        return rel.restrict(self.session.sat(scope, event.guard))

    # operational executor --------------------------------------------------------

    def execute(self, stmt: Statement, initial: Iterable[tuple], scope: ScopeContext,
                fuel: int, check_loop_invariants: bool = True,
                strict_stuck: bool = False) -> set:
        """Big-step run from each initial state; returns states and ✓ outcomes."""
        if fuel <= 0:
            raise ExecutionError("fuel-exhausted", "fuel must be positive")
        out: set = set()
        for st in initial:
            for o, _ in self._run(stmt, st, scope, fuel, check_loop_invariants,
                                  strict_stuck):
                out.add(o)
        return out

    def _run(self, stmt: Statement, state: tuple, scope: ScopeContext, fuel: int,
             li: bool, strict: bool) -> list[tuple]:
        """Returns a list of (outcome, fuel_left); outcome is a state or ✓."""
        if fuel <= 0:
            raise ExecutionError("fuel-exhausted", "step budget exhausted")
        comp = self.session.compiler(scope)
        if isinstance(stmt, Stop):
            return [(CHECKMARK, fuel - 1)]
        if isinstance(stmt, Sub):
            try:
                succ = self.sub_successors(stmt, scope, state)
            except EvalError:
                succ = []  # matches the relational reading: undefined means disabled
            return [(n, fuel - 1) for n in succ]
        if isinstance(stmt, Assert):
            p = assert_conjunction(stmt)
            try:
                ok = comp.compile(p)(state, None, [])
            except EvalError:
                ok = False
            if not ok:
                raise ExecutionError(
                    "assert-failed", "assertion violated",
                    dict(zip(scope.all_vars, state)))
            return [(state, fuel - 1)]
        if isinstance(stmt, If):
            for cond, body in stmt.branches:
                if self._guard_true(comp, cond, state):
                    return self._run_block(body, state, scope, fuel - 1, li, strict)
            if stmt.else_body is not None:
                return self._run_block(stmt.else_body, state, scope, fuel - 1,
                                       li, strict)
            if strict:
                raise ExecutionError("stuck", "no IF branch matched",
                                     dict(zip(scope.all_vars, state)))
            return [(state, fuel - 1)]
        if isinstance(stmt, While):
            return self._run_while(stmt, state, scope, fuel, li, strict)
        if isinstance(stmt, BeginEnd):
            return self._run_begin(stmt, state, scope, fuel, li, strict)
        # sequence
        results = [(state, fuel)]
        for item in seq_items(stmt):
            nxt: list[tuple] = []
            for o, f in results:
                if o is CHECKMARK:
                    nxt.append((o, f))
                else:
                    nxt.extend(self._run(item, o, scope, f, li, strict))
            results = nxt
        return results

    @staticmethod
    def _guard_true(comp, cond: Node, state: tuple) -> bool:
        try:
            return bool(comp.compile(cond)(state, None, []))
        except EvalError:
            return False

    def _run_block(self, body: Statement, state: tuple, scope: ScopeContext,
                   fuel: int, li: bool, strict: bool) -> list[tuple]:
        if fuel <= 0:
            raise ExecutionError("fuel-exhausted", "step budget exhausted")
        return self._run(body, state, scope, fuel, li, strict)

    def _check_li(self, stmt: While, state: tuple, scope: ScopeContext) -> None:
        comp = self.session.compiler(scope)
        inv = loop_invariant(stmt)
        ok = False
        try:
            ok = comp.compile(inv)(state, None, [])
        except EvalError:
            ok = False
        if not ok:
            raise ExecutionError("assert-failed", "loop invariant violated",
                                 dict(zip(scope.all_vars, state)))

    def _run_while(self, stmt: While, state: tuple, scope: ScopeContext,
                   fuel: int, li: bool, strict: bool) -> list[tuple]:
        comp = self.session.compiler(scope)
        done: list[tuple] = []
        work = [(state, fuel)]
        while work:
            st, f = work.pop()
            if f <= 0:
                raise ExecutionError("fuel-exhausted", "loop exceeded step budget")
            if li:
                self._check_li(stmt, st, scope)
            if not self._guard_true(comp, stmt.cond, st):
                done.append((st, f - 1))
                continue
            for o, f2 in self._run_block(stmt.body, st, scope, f - 1, li, strict):
                if o is CHECKMARK:
                    done.append((o, f2))
                else:
                    work.append((o, f2))
        return done

    def _run_begin(self, stmt: BeginEnd, state: tuple, scope: ScopeContext,
                   fuel: int, li: bool, strict: bool) -> list[tuple]:
        inner_scope = push_block(scope, stmt, self.session.info)
        inner_vars = inner_scope.all_vars
        outer_pos = {v: i for i, v in enumerate(scope.all_vars)}
        comp = self.session.compiler(inner_scope)
        bi = conj(*[i.pred for i in stmt.invariants if i.kind == "invariant"])
        bif = comp.compile(bi)
        domains = []
        for w in stmt.locals:
            domains.append(type_domain(inner_scope.type_of(w),
                                       self.session.interp,
                                       self.session.options.state_cap))
        local_pos = {w: inner_vars.index(w) for w in stmt.locals}
        sel = tuple(outer_pos.get(v) for v in inner_vars)
        out: list[tuple] = []
        for combo in itertools.product(*domains):
            inner_state = list(
                state[s] if s is not None else None for s in sel)
            for w, v in zip(stmt.locals, combo):
                inner_state[local_pos[w]] = v
            ist = tuple(inner_state)
            try:
                if not bif(ist, None, []):
                    continue
            except EvalError:
                continue
            for o, f in self._run_block(stmt.body, ist, inner_scope,
                                        fuel - 1, li, strict):
                if o is CHECKMARK:
                    out.append((o, f))
                else:
                    out.append((tuple(o[inner_vars.index(v)]
                                      for v in scope.all_vars), f))
        return _dedup(out)


# ---------------------------------------------------------------------------
# write sets (appendix RW rules)

def write_set(stmt: Statement, visible: Iterable[str]) -> frozenset[str]:
    """RW analysis; `visible` is the variable set of the enclosing scope."""
    vis = frozenset(visible)
    if isinstance(stmt, (Stop, Assert)):
        return frozenset()
    if isinstance(stmt, Sub):
        return frozenset(stmt.writes)
    if isinstance(stmt, If):
        out: frozenset[str] = frozenset()
        for _, body in stmt.branches:
            out |= write_set(body, vis)
        if stmt.else_body is not None:
            out |= write_set(stmt.else_body, vis)
        return out
    if isinstance(stmt, While):
        return write_set(stmt.body, vis)
    if isinstance(stmt, BeginEnd):
        inner = vis | frozenset(stmt.locals)
        return write_set(stmt.body, inner) & vis
    out = frozenset()
    for item in seq_items(stmt):
        out |= write_set(item, vis)
    return out


def _dedup_states(values: list) -> list:
    seen: set = set()
    out = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# module-level convenience API

def interpret(stmt: Statement, scope: ScopeContext, session: Session) -> ScopedRelation:
    return Interpreter(session).relation(stmt, scope)


def trm_holds(loop: While, scope: ScopeContext, session: Session) -> TrmResult:
    return Interpreter(session).trm_holds(loop, scope)


def interpret_event(event: Event, machine_scope: ScopeContext,
                    session: Session) -> ScopedRelation:
    return Interpreter(session).event_relation(event, machine_scope)


def execute(stmt: Statement, initial: Iterable[tuple], scope: ScopeContext,
            session: Session, fuel: int, check_loop_invariants: bool = True,
            strict_stuck: bool = False) -> set:
    return Interpreter(session).execute(stmt, initial, scope, fuel,
                                        check_loop_invariants, strict_stuck)
