"""Proof obligation generation: labelled sequents plus relational check forms.

Generation is a pure syntax walk; relations and state spaces are only built
later when a PO is checked.  Conventions for sequent symbols: plain names are
before states, single primes are after states, double primes appear when a
rely step is chained after another relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ScopeError
from .expr import (Binary, Name, Node, TRUE, conj, conjuncts_of, free_names,
                   negate, shift_primes, substitute)
from .model import EnvironmentDef, EventBMachine, ProcessDef, SlpModel
from .scopes import (ScopeContext, machine_scope, model_scope, process_scope,
                     push_block, push_loop)
from .session import Session
from .span import Span
from .stmt import (Assert, BeginEnd, If, InvariantDef, Statement, Stop, Sub,
                   While, seq_items)
from .semantics import assert_conjunction, loop_invariant, while_exit_pred

FAMILIES = ("WD", "INV", "GRT", "ASN", "FIS_RELY", "CLO_RELY_REFL",
            "CLO_RELY_TRANS", "VAR", "CMP", "THM", "AXM_SAT", "REF_GRT")


@dataclass(frozen=True)
class CheckForm:
    """Everything the discharge module needs to decide a PO by enumeration."""

    kind: str
    scope: Optional[ScopeContext] = None
    stmt: Optional[Statement] = None
    context: Node = TRUE
    goal: Optional[Node] = None
    rely: Optional[Node] = None          # None encodes the identity rely
    pre_assert: Optional[Node] = None    # ASN case (i): preceding assertion
    prev_stmt: Optional[Statement] = None  # ASN case (ii): preceding statement
    prev_loop: Optional[While] = None    # ASN case (i) via a loop exit
    guarantee: Optional[Node] = None
    loop: Optional[While] = None
    events: tuple = ()
    prior_theorems: tuple = ()


@dataclass(frozen=True)
class ProofObligation:
    id: str
    family: str
    hypotheses: tuple[tuple[str, Node], ...]
    goal: Optional[Node]
    form: CheckForm
    relational_form: str
    origin: Optional[Span] = field(default=None, compare=False)


def primed(node: Node, scope: ScopeContext) -> Node:
    return shift_primes(node, frozenset(scope.all_vars), 1)


def unprime(node: Node) -> Node:
    """Replace every singly-primed occurrence with the plain name."""
    return _map_primes(node, {1: 0})


def reprime(node: Node, mapping: dict[int, int]) -> Node:
    return _map_primes(node, mapping)


def _map_primes(node: Node, mapping: dict[int, int]) -> Node:
    from .expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit,
                       Quant, SetLit, Unary)
    if isinstance(node, Name):
        if node.primes in mapping:
            return Name(node.text, mapping[node.primes], span=node.span)
        return node
    if isinstance(node, Unary):
        return Unary(node.op, _map_primes(node.operand, mapping), span=node.span)
    if isinstance(node, Binary):
        return Binary(node.op, _map_primes(node.left, mapping),
                      _map_primes(node.right, mapping), span=node.span)
    if isinstance(node, BoolCast):
        return BoolCast(_map_primes(node.pred, mapping), span=node.span)
    if isinstance(node, Quant):
        return Quant(node.kind, node.names, _map_primes(node.body, mapping),
                     span=node.span)
    if isinstance(node, SetLit):
        return SetLit(tuple(_map_primes(i, mapping) for i in node.items),
                      span=node.span)
    if isinstance(node, Apply):
        return Apply(_map_primes(node.fn, mapping),
                     _map_primes(node.arg, mapping), span=node.span)
    return node


def frame_pred(scope: ScopeContext, written: frozenset[str]) -> list[Node]:
    out = []
    for v in scope.all_vars:
        if v not in written:
            out.append(Binary("=", Name(v, 1), Name(v, 0)))
    return out


def statement_predicate(stmt: Statement, scope: ScopeContext) -> Optional[Node]:
    """Before-after predicate of a statement, when it has a first-order form."""
    if isinstance(stmt, Sub):
        parts = []
        for p in stmt.parts:
            if p.kind == "eq":
                parts.append(Binary("=", Name(p.targets[0], 1), p.rhs))
            elif p.kind == "in":
                parts.append(Binary("in", Name(p.targets[0], 1), p.rhs))
            else:
                parts.append(p.rhs)
        parts.extend(frame_pred(scope, stmt.writes))
        return conj(*parts)
    if isinstance(stmt, Assert):
        return conj(assert_conjunction(stmt), *frame_pred(scope, frozenset()))
    if isinstance(stmt, While):
        return conj(while_exit_pred(stmt), *frame_pred(scope, frozenset()))
    if isinstance(stmt, If):
        arms = []
        seen: list[Node] = []
        for cond, body in stmt.branches:
            items = seq_items(body)
            if len(items) != 1:
                return None
            body_pred = statement_predicate(items[0], scope)
            if body_pred is None:
                return None
            eff = conj(cond, *[negate(c) for c in seen])
            seen.append(cond)
            arms.append(conj(eff, body_pred))
        none_match = conj(*[negate(c) for c in seen])
        if stmt.else_body is not None:
            items = seq_items(stmt.else_body)
            if len(items) != 1:
                return None
            body_pred = statement_predicate(items[0], scope)
            if body_pred is None:
                return None
            arms.append(conj(none_match, body_pred))
        else:
            arms.append(conj(none_match, *frame_pred(scope, frozenset())))
        out = arms[-1]
        for arm in reversed(arms[:-1]):
            out = Binary("or", arm, out)
        return out
    return None  # STOP, begin-end and compound sequences have no FO encoding


def feasibility_goal(stmt: Statement, scope: ScopeContext) -> Optional[Node]:
    """State predicate meaning 'the statement is applicable here'."""
    from .expr import Quant, SetLit
    if isinstance(stmt, Sub):
        parts = []
        for p in stmt.parts:
            if p.kind == "in":
                parts.append(Binary("/=", p.rhs, SetLit(())))
            elif p.kind == "such":
                fresh = [t + "_" for t in p.targets]
                body = p.rhs
                for t, f in zip(p.targets, fresh):
                    body = _rename_primed(body, t, f)
                parts.append(Quant("exists", tuple(fresh), body))
        return conj(*parts) if parts else TRUE
    if isinstance(stmt, Assert):
        return assert_conjunction(stmt)
    if isinstance(stmt, While):
        return while_exit_pred(stmt)
    if isinstance(stmt, (Stop, If, BeginEnd)):
        return TRUE
    return TRUE


def _rename_primed(node: Node, name: str, fresh: str) -> Node:
    from .expr import (Apply, BoolCast, BoolLit, IntLit, Quant, SetLit, Unary)
    if isinstance(node, Name):
        if node.text == name and node.primes == 1:
            return Name(fresh, 0, span=node.span)
        return node
    if isinstance(node, Unary):
        return Unary(node.op, _rename_primed(node.operand, name, fresh),
                     span=node.span)
    if isinstance(node, Binary):
        return Binary(node.op, _rename_primed(node.left, name, fresh),
                      _rename_primed(node.right, name, fresh), span=node.span)
    if isinstance(node, BoolCast):
        return BoolCast(_rename_primed(node.pred, name, fresh), span=node.span)
    if isinstance(node, Quant):
        if fresh in node.names:
            return node
        return Quant(node.kind, node.names,
                     _rename_primed(node.body, name, fresh), span=node.span)
    if isinstance(node, SetLit):
        return SetLit(tuple(_rename_primed(i, name, fresh) for i in node.items),
                      span=node.span)
    if isinstance(node, Apply):
        return Apply(_rename_primed(node.fn, name, fresh),
                     _rename_primed(node.arg, name, fresh), span=node.span)
    return node


def unit_rely(unit) -> Optional[Node]:
    if not unit.relies:
        return None
    return conj(*[r.pred for r in unit.relies])


def unit_guarantee(unit) -> Optional[Node]:
    if not unit.guarantees:
        return None
    return conj(*[g.pred for g in unit.guarantees])


@dataclass
class _Context:
    """Assertion context while walking a block."""

    kind: str = "head"  # head | assert | stmt | loop-exit
    assert_pred: Optional[Node] = None
    prev_stmt: Optional[Statement] = None
    prev_loop: Optional[While] = None

    def context_pred(self) -> Node:
        if self.kind in ("assert", "loop-exit") and self.assert_pred is not None:
            return self.assert_pred
        return TRUE


class Generator:
    def __init__(self, session: Session):
        self.session = session
        self.model = session.model
        self.pos: list[ProofObligation] = []
        self._ids: dict[str, int] = {}
        self.contexts: dict[tuple, Node] = {}

    # id allocation -----------------------------------------------------------

    def _fresh_id(self, base: str, family: str) -> str:
        key = f"{base}.{family}"
        n = self._ids.get(key, 0)
        self._ids[key] = n + 1
        return key if n == 0 else f"{key}.{n + 1}"

    def emit(self, base: str, family: str, hyps, goal, form: CheckForm,
             relational: str, origin: Optional[Span]) -> None:
        self.pos.append(ProofObligation(
            self._fresh_id(base, family), family, tuple(hyps), goal, form,
            relational, origin))

    # entry point ---------------------------------------------------------------

    def generate(self) -> list[ProofObligation]:
        m = self.model
        self._axm_sat()
        self._theorems(f"{m.name}", m.invariants, model_scope(m, self.session.info))
        for unit in m.units:
            if unit.relies:
                self._rely_pos(unit)
        for proc in m.processes:
            self._cmp_pos(proc)
        for proc in m.processes:
            base_scope = process_scope(m, proc, self.session.info)
            self._theorems(proc.label, proc.invariants, base_scope)
            if proc.body is not None:
                ctx = _Context(kind="head")
                self._walk_block(proc.body, base_scope, proc, proc.label,
                                 (proc.label,), ctx)
        if m.machine is not None:
            for unit in m.units:
                if unit.refines and unit.guarantees:
                    self.pos.append(refinement_guarantee(
                        self.session, unit,
                        [m.machine.event(e) for e in unit.refines]))
        return self.pos

    # families ------------------------------------------------------------------

    def _axm_sat(self) -> None:
        m = self.model
        goal = conj(*[a.pred for a in m.context.axioms])
        self.emit(f"{m.name}.axioms", "AXM_SAT", [], goal,
                  CheckForm(kind="axm", goal=goal),
                  "check_interpretation(axioms, CHECK bindings) = []", m.span)

    def _theorems(self, base: str, invdefs: tuple[InvariantDef, ...],
                  scope: ScopeContext) -> None:
        proven: list[tuple[str, Node]] = []
        for item in invdefs:
            if item.kind != "theorem":
                continue
            hyps = list(scope.conjuncts) + proven
            form = CheckForm(kind="thm", scope=scope, goal=item.pred,
                             prior_theorems=tuple(proven))
            self.emit(f"{base}.{item.label}", "THM", hyps, item.pred, form,
                      "hypotheses |- theorem over all scope states", item.span)
            proven.append((item.label, item.pred))

    def _rely_pos(self, unit) -> None:
        m = self.model
        scope = model_scope(m, self.session.info)
        rely = unit_rely(unit)
        assert rely is not None
        inv_primed = conj(*[p for _, p in scope.conjuncts
                            if any(True for _ in free_names(p))])
        hyps = list(scope.conjuncts) + [("rely", rely)]
        goal = primed(inv_primed, scope)
        self.emit(f"{unit.label}.rely", "FIS_RELY", hyps, goal,
                  CheckForm(kind="fis", scope=scope, rely=rely, goal=goal),
                  "[I] <| [R] <: [I] * [I]", unit.span)
        refl_goal = unprime(rely)
        self.emit(f"{unit.label}.rely", "CLO_RELY_REFL", list(scope.conjuncts),
                  refl_goal,
                  CheckForm(kind="clo_refl", scope=scope, rely=rely, goal=refl_goal),
                  "id(Sigma) <: [R]", unit.span)
        hop = reprime(rely, {0: 1, 1: 2})
        trans_goal = reprime(rely, {1: 2})
        hyps2 = list(scope.conjuncts) + [("rely", rely), ("rely2", hop)]
        self.emit(f"{unit.label}.rely", "CLO_RELY_TRANS", hyps2, trans_goal,
                  CheckForm(kind="clo_trans", scope=scope, rely=rely,
                            goal=trans_goal),
                  "[R] ; [R] <: [R]", unit.span)

    def _cmp_pos(self, proc: ProcessDef) -> None:
        """B = relying process, A = every other unit of its universe."""
        m = self.model
        scope = model_scope(m, self.session.info)
        rely = unit_rely(proc)
        for other in m.units:
            if other is proc:
                continue
            g = unit_guarantee(other)
            hyps = list(scope.conjuncts)
            if g is not None:
                hyps.append((f"guarantee({other.label})", g))
            goal = rely if rely is not None else TRUE
            form = CheckForm(kind="cmp", scope=scope, guarantee=g, rely=rely,
                             goal=goal)
            self.emit(f"{proc.label}.cmp-{other.label}", "CMP", hyps, goal, form,
                      "[I] <| [G_A] <: [R_B]", proc.span)

    # body walk -------------------------------------------------------------------

    def _seg(self, stmt: Statement, index: int) -> str:
        if isinstance(stmt, Sub) and stmt.name:
            return stmt.name
        return f"s{index + 1}"

    def _walk_block(self, body: Statement, scope: ScopeContext, proc: ProcessDef,
                    prefix: str, path: tuple, ctx: _Context) -> None:
        for i, item in enumerate(seq_items(body)):
            seg = self._seg(item, i)
            base = f"{prefix}.{seg}"
            ipath = path + (i,)
            self.contexts[ipath] = ctx.context_pred()
            if isinstance(item, Assert):
                self._asn_po(item, scope, proc, base, ctx)
                conjunction = assert_conjunction(item)
                if ctx.kind in ("assert", "loop-exit") and ctx.assert_pred is not None:
                    merged = conj(ctx.assert_pred, conjunction)
                else:
                    merged = conjunction
                self._action_pos(item, scope, proc, base, ctx, grt=False)
                ctx = _Context(kind="assert", assert_pred=merged)
                continue
            if isinstance(item, While):
                self._var_po(item, scope, proc, base)
                self._loop_entry_asn(item, scope, proc, base, ctx)
                self._action_pos(item, scope, proc, base, ctx, grt=False)
                inner = push_loop(scope, item)
                self._theorems(base, item.invariants, inner)
                body_ctx = _Context(kind="assert", assert_pred=item.cond)
                self._walk_block(item.body, inner, proc, f"{base}.body",
                                 ipath + (("loop",),), body_ctx)
                ctx = _Context(kind="loop-exit", assert_pred=while_exit_pred(item),
                               prev_loop=item)
                continue
            if isinstance(item, If):
                self._action_pos(item, scope, proc, base, ctx, grt=False)
                seen: list[Node] = []
                for j, (cond, branch) in enumerate(item.branches):
                    eff = conj(cond, *[negate(c) for c in seen])
                    seen.append(cond)
                    branch_ctx = _Context(kind="assert", assert_pred=eff)
                    self._walk_block(branch, scope, proc, f"{base}.then{j}",
                                     ipath + (("then", j),), branch_ctx)
                if item.else_body is not None:
                    eff = conj(*[negate(c) for c in seen]) if seen else TRUE
                    branch_ctx = _Context(kind="assert", assert_pred=eff)
                    self._walk_block(item.else_body, scope, proc, f"{base}.else",
                                     ipath + (("else",),), branch_ctx)
                ctx = _Context(kind="stmt", prev_stmt=item)
                continue
            if isinstance(item, BeginEnd):
                self._action_pos(item, scope, proc, base, ctx, grt=False)
                inner = push_block(scope, item, self.session.info)
                self._theorems(base, item.invariants, inner)
                inner_ctx = _Context(kind="head")
                self._walk_block(item.body, inner, proc, f"{base}.block",
                                 ipath + (("block",),), inner_ctx)
                ctx = _Context(kind="stmt", prev_stmt=item)
                continue
            # substitutions and STOP
            self._action_pos(item, scope, proc, base, ctx,
                             grt=isinstance(item, Sub))
            ctx = _Context(kind="stmt", prev_stmt=item)

    def _action_pos(self, stmt: Statement, scope: ScopeContext, proc: ProcessDef,
                    base: str, ctx: _Context, grt: bool) -> None:
        a = ctx.context_pred()
        hyps = list(scope.conjuncts)
        if a is not TRUE:
            hyps.append(("ctx", a))
        spred = statement_predicate(stmt, scope)
        act_hyps = hyps + ([("action", spred)] if spred is not None else [])
        wd_goal = feasibility_goal(stmt, scope)
        self.emit(base, "WD", hyps, wd_goal,
                  CheckForm(kind="wd", scope=scope, stmt=stmt, context=a),
                  "([I] /\\ [A]) <| [[a]] /= {}", stmt.span)
        state_preds = [p for _, p in scope.conjuncts
                       if any(True for _ in free_names(p))]
        inv_goal = primed(conj(*state_preds), scope) if state_preds else TRUE
        self.emit(base, "INV", act_hyps, inv_goal,
                  CheckForm(kind="inv", scope=scope, stmt=stmt, context=a),
                  "[[a]][[I] /\\ [A]] <: [I]", stmt.span)
        if grt and proc.guarantees:
            g = unit_guarantee(proc)
            assert g is not None
            self.emit(base, "GRT", act_hyps, g,
                      CheckForm(kind="grt", scope=scope, stmt=stmt, context=a,
                                guarantee=g),
                      "([I] /\\ [A]) <| [[a]] <: [G]", stmt.span)

    def _var_po(self, loop: While, scope: ScopeContext, proc: ProcessDef,
                base: str) -> None:
        inner = push_loop(scope, loop)
        v = loop.variant
        vprimed = shift_primes(v, frozenset(scope.all_vars), 1)
        goal = conj(Binary("<", vprimed, v),
                    Binary(">=", v, Binary("-", v, v)))
        hyps = list(inner.conjuncts) + [("cond", loop.cond)]
        spred = None
        items = seq_items(loop.body)
        if len(items) == 1:
            spred = statement_predicate(items[0], inner)
        if spred is not None:
            hyps.append(("body", spred))
        self.emit(base, "VAR", hyps, goal,
                  CheckForm(kind="var", scope=scope, loop=loop),
                  "variant decreases on every loop transition and is >= 0",
                  loop.span)

    def _loop_entry_asn(self, loop: While, scope: ScopeContext, proc: ProcessDef,
                        base: str, ctx: _Context) -> None:
        goal = loop_invariant(loop)
        self._emit_asn(goal, scope, proc, base, ctx, loop.span)

    def _asn_po(self, stmt: Assert, scope: ScopeContext, proc: ProcessDef,
                base: str, ctx: _Context) -> None:
        goal = assert_conjunction(stmt)
        self._emit_asn(goal, scope, proc, base, ctx, stmt.span)

    def _emit_asn(self, goal: Node, scope: ScopeContext, proc: ProcessDef,
                  base: str, ctx: _Context, origin: Optional[Span]) -> None:
        rely = unit_rely(proc)
        hyps = list(scope.conjuncts)
        display_goal = goal
        if ctx.kind in ("assert", "loop-exit") and ctx.assert_pred is not None:
            # case (i): previous assertion, blurred by the rely
            hyps.append(("pre", ctx.assert_pred))
            if rely is not None:
                hyps.append(("rely", rely))
                display_goal = primed(goal, scope)
            form = CheckForm(kind="asn", scope=scope, goal=goal, rely=rely,
                             pre_assert=ctx.assert_pred, prev_loop=ctx.prev_loop)
            rel = "([A] <| [R])[[I]] <: [An]"
        elif ctx.kind == "stmt" and ctx.prev_stmt is not None:
            spred = statement_predicate(ctx.prev_stmt, scope)
            if rely is None and _is_deterministic_assign(ctx.prev_stmt):
                mapping = _assign_mapping(ctx.prev_stmt)
                display_goal = substitute(goal, mapping)
            else:
                if spred is not None:
                    hyps.append(("action", spred))
                if rely is not None:
                    hyps.append(("rely", reprime(rely, {0: 1, 1: 2})))
                    display_goal = reprime(primed(goal, scope), {1: 2})
                else:
                    display_goal = primed(goal, scope)
            form = CheckForm(kind="asn", scope=scope, goal=goal, rely=rely,
                             prev_stmt=ctx.prev_stmt)
            rel = "([R] ; [[a]])[[I]] <: [An]"
        else:
            if rely is not None:
                hyps.append(("rely", rely))
                display_goal = primed(goal, scope)
            form = CheckForm(kind="asn", scope=scope, goal=goal, rely=rely)
            rel = "[R][[I]] <: [An]"
        self.emit(base, "ASN", hyps, display_goal, form, rel, origin)


def _is_deterministic_assign(stmt: Statement) -> bool:
    return isinstance(stmt, Sub) and all(p.kind == "eq" for p in stmt.parts)


def _assign_mapping(stmt: Sub) -> dict[str, Node]:
    return {p.targets[0]: p.rhs for p in stmt.parts}


def generate(session: Session) -> list[ProofObligation]:
    return Generator(session).generate()


def refinement_guarantee(session: Session, unit, events: list) -> ProofObligation:
    """New environment/process refinement: guarantee contained in refined events."""
    m = session.model
    if m.machine is None:
        raise ScopeError("no-machine", "refinement check requires a MACHINE")
    mscope = machine_scope(m, m.machine, session.info)
    # shared-variable refinement: the SLP globals are the machine variables
    extra = tuple((i.label, i.pred) for i in m.invariants
                  if i.kind == "invariant"
                  and all(t in mscope.all_vars or t in m.context.constants
                          or t in m.context.sets
                          for t, _ in free_names(i.pred)))
    combined = ScopeContext(mscope.layers, mscope.conjuncts + extra, mscope.types)
    g = unit_guarantee(unit)
    if g is None:
        raise ScopeError("no-guarantee", f"{unit.label} declares no guarantee")
    hyps = list(combined.conjuncts) + [("guarantee", g)]
    arms = []
    for ev in events:
        action_pred = statement_predicate(ev.action, combined)
        arm = conj(ev.guard, action_pred) if ev.guard is not None else action_pred
        arms.append(arm)
    mode = session.options.ref_mode
    goal: Optional[Node] = None
    if all(a is not None for a in arms):
        goal = arms[0]
        for a in arms[1:]:
            goal = Binary("and" if mode == "inter" else "or", goal, a)
    form = CheckForm(kind="ref", scope=combined, guarantee=g,
                     events=tuple(events), goal=goal)
    op = "/\\" if mode == "inter" else "\\/"
    po = ProofObligation(
        f"{unit.label}.refines.REF_GRT", "REF_GRT", tuple(hyps), goal, form,
        f"{{(s,s') : [G] | s : [I]}} <: {op} of refined event relations",
        unit.span)
    return po


def assertion_context(session: Session, path: tuple) -> Node:
    """The predicate A in force at a statement position."""
    gen = Generator(session)
    gen.generate()
    if path not in gen.contexts:
        raise ScopeError("no-such-position", f"no action at {path!r}")
    return gen.contexts[path]
