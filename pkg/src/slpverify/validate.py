"""Structural validation: scoping rules, distinctness, label uniqueness, typing.

Diagnostics are data (never exceptions) and come back in source order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import Node, free_names
from .model import SlpModel, is_label
from .span import Span
from .stmt import (Assert, BeginEnd, If, NamedPred, Statement, Stop, Sub,
                   While, seq_items)
from .typecheck import TypeInfo, infer_types


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    span: Span | None = None
    severity: str = "error"

    def __str__(self) -> str:
        loc = f"{self.span} " if self.span else ""
        return f"{loc}{self.severity} [{self.rule}] {self.message}"


class _Checker:
    def __init__(self, model: SlpModel, info: TypeInfo | None = None):
        self.model = model
        self.out: list[Diagnostic] = []
        self.info = info

    def add(self, rule: str, message: str, span: Span | None = None) -> None:
        self.out.append(Diagnostic(rule, message, span))

    def run(self) -> list[Diagnostic]:
        m = self.model
        self.check_labels()
        self.check_distinct_vars()
        if not m.processes:
            self.add("need-process", "a model requires at least one process", m.span)
        consts = set(m.context.constants)
        sets = set(m.context.sets)
        globals_ = set(m.globals)
        for ax in m.context.axioms:
            self.check_pred(ax.pred, consts | sets, "axiom-scope",
                            f"axiom {ax.label}", primed_over=set())
        for inv in m.invariants:
            self.check_pred(inv.pred, consts | sets | globals_, "invariant-scope",
                            f"invariant {inv.label}", primed_over=set())
        if m.initialisation is not None:
            self.check_init(m.initialisation, m.globals, consts | sets, "model")
        elif m.globals:
            self.add("init-incomplete", "variables declared but no INITIALISATION",
                     m.span)
        for env in m.environments:
            for np in env.relies + env.guarantees:
                self.check_pred(np.pred, consts | sets | globals_, "rely-scope",
                                f"{env.label}.{np.label}", primed_over=globals_)
            self.check_refines(env.label, env.refines, env.span)
        for proc in m.processes:
            self.check_process(proc, consts, sets, globals_)
        if m.machine is not None:
            self.check_machine(consts, sets)
        for rm in m.refmaps:
            try:
                proc = m.process(rm.process)
            except KeyError:
                self.add("refmap-scope", f"REFMAP names unknown process {rm.process!r}",
                         rm.span)
                proc = None
            if m.machine is None:
                self.add("refmap-scope", "REFMAP requires a MACHINE", rm.span)
            else:
                known = {e.label for e in m.machine.events}
                for src, dst in rm.pairs:
                    if dst not in known:
                        self.add("refmap-scope",
                                 f"REFMAP target {dst!r} is not a machine event", rm.span)
        self.check_types()
        self.out.sort(key=lambda d: (d.span.begin if d.span else 0, d.rule, d.message))
        return self.out

    # labels ---------------------------------------------------------------

    def check_labels(self) -> None:
        m = self.model
        pool: dict[str, Span | None] = {}

        def claim(label: str, span: Span | None, namespace: dict) -> None:
            if not is_label(label):
                self.add("label-syntax", f"bad label {label!r}", span)
            if label in namespace:
                self.add("dup-label", f"duplicate label {label!r}", span)
            namespace[label] = span

        for ax in m.context.axioms:
            claim(ax.label, ax.span, pool)
        for inv in m.invariants:
            claim(inv.label, inv.span, pool)
        for env in m.environments:
            claim(env.label, env.span, pool)
        for proc in m.processes:
            claim(proc.label, proc.span, pool)
            ppool: dict[str, Span | None] = {}
            for np in proc.relies + proc.guarantees:
                claim(np.label, np.span, ppool)
            for inv in proc.invariants:
                claim(inv.label, inv.span, ppool)
            if proc.body is not None:
                self._claim_body_labels(proc.body, ppool, claim)
        if m.machine is not None:
            epool: dict[str, Span | None] = {}
            for ev in m.machine.events:
                claim(ev.label, ev.span, epool)

    def _claim_body_labels(self, stmt: Statement, ppool: dict, claim) -> None:
        for item in seq_items(stmt):
            if isinstance(item, Sub):
                for part in item.parts:
                    if part.label:
                        claim(part.label, part.span, ppool)
            elif isinstance(item, Assert):
                for label, _ in item.conjuncts:
                    if label:
                        claim(label, item.span, ppool)
            elif isinstance(item, If):
                for _, body in item.branches:
                    self._claim_body_labels(body, ppool, claim)
                if item.else_body is not None:
                    self._claim_body_labels(item.else_body, ppool, claim)
            elif isinstance(item, While):
                bpool: dict[str, Span | None] = {}
                for inv in item.invariants:
                    claim(inv.label, inv.span, bpool)
                self._claim_body_labels(item.body, ppool, claim)
            elif isinstance(item, BeginEnd):
                bpool = {}
                for inv in item.invariants:
                    claim(inv.label, inv.span, bpool)
                self._claim_body_labels(item.body, ppool, claim)

    # variable distinctness --------------------------------------------------

    def check_distinct_vars(self) -> None:
        m = self.model
        reserved = set(m.context.constants) | set(m.context.sets)
        if len(set(m.context.constants)) != len(m.context.constants):
            self.add("distinct-vars", "duplicate constant names", m.span)
        if len(set(m.context.sets)) != len(m.context.sets):
            self.add("distinct-vars", "duplicate set names", m.span)
        seen: set[str] = set()
        for v in m.globals:
            if v in seen:
                self.add("distinct-vars", f"duplicate global {v!r}", m.span)
            if v in reserved:
                self.add("distinct-vars",
                         f"global {v!r} collides with a constant or set", m.span)
            seen.add(v)
        for proc in m.processes:
            taken = set(m.globals) | reserved
            local_seen: set[str] = set()
            for u in proc.locals:
                if u in local_seen:
                    self.add("distinct-vars",
                             f"duplicate local {u!r} in process {proc.label}", proc.span)
                if u in taken:
                    self.add("distinct-vars",
                             f"local {u!r} in process {proc.label} shadows an outer name",
                             proc.span)
                local_seen.add(u)
            if proc.body is not None:
                self._check_block_vars(proc.body, taken | local_seen, proc.label)

    def _check_block_vars(self, stmt: Statement, taken: set[str], where: str) -> None:
        for item in seq_items(stmt):
            if isinstance(item, If):
                for _, body in item.branches:
                    self._check_block_vars(body, taken, where)
                if item.else_body is not None:
                    self._check_block_vars(item.else_body, taken, where)
            elif isinstance(item, While):
                self._check_block_vars(item.body, taken, where)
            elif isinstance(item, BeginEnd):
                inner = set(taken)
                for w in item.locals:
                    if w in inner:
                        self.add("distinct-vars",
                                 f"block local {w!r} shadows an outer name in {where}",
                                 item.span)
                    inner.add(w)
                self._check_block_vars(item.body, inner, where)

    # predicate scoping -------------------------------------------------------

    def check_pred(self, pred: Node, visible: set[str], rule: str, where: str,
                   primed_over: set[str]) -> None:
        for name, primes in free_names(pred):
            if name not in visible and not (primes and name in primed_over):
                self.add(rule, f"{where}: name {name!r} not in scope", pred.span)
            elif primes:
                if not primed_over:
                    self.add("primed-context",
                             f"{where}: primed {name}{chr(39) * primes} not allowed here",
                             pred.span)
                elif name not in primed_over:
                    self.add("primed-context",
                             f"{where}: {name!r} may not be primed here", pred.span)
                elif primes > 1:
                    self.add("primed-context",
                             f"{where}: only single primes are allowed", pred.span)

    def check_expr(self, expr: Node, visible: set[str], where: str) -> None:
        self.check_pred(expr, visible, "unbound-name", where, primed_over=set())

    def check_init(self, init: Sub, variables: tuple[str, ...],
                   closed: set[str], where: str) -> None:
        written: list[str] = []
        for part in init.parts:
            for t in part.targets:
                written.append(t)
                if t not in variables:
                    self.add("init-scope",
                             f"{where} initialisation writes unknown variable {t!r}",
                             part.span)
            if part.kind == "such":
                self.check_pred(part.rhs, closed, "init-reads-state",
                                f"{where} initialisation", primed_over=set(part.targets))
            else:
                self.check_pred(part.rhs, closed, "init-reads-state",
                                f"{where} initialisation", primed_over=set())
        for v in variables:
            if written.count(v) > 1:
                self.add("init-dup", f"{where} initialisation writes {v!r} twice",
                         init.span)
            elif v not in written:
                self.add("init-incomplete",
                         f"{where} initialisation does not set {v!r}", init.span)

    # processes / machine -------------------------------------------------------

    def check_process(self, proc, consts: set[str], sets: set[str],
                      globals_: set[str]) -> None:
        visible = consts | sets | globals_
        for np in proc.relies + proc.guarantees:
            self.check_pred(np.pred, visible, "rely-scope",
                            f"{proc.label}.{np.label}", primed_over=globals_)
        for inv in proc.invariants:
            self.check_pred(inv.pred, visible | set(proc.locals),
                            "invariant-scope", f"{proc.label}.{inv.label}",
                            primed_over=set())
        self.check_refines(proc.label, proc.refines, proc.span)
        if proc.body is not None:
            self.check_stmt(proc.body, visible | set(proc.locals),
                            globals_ | set(proc.locals), proc.label)

    def check_refines(self, label: str, refines: tuple[str, ...],
                      span: Span | None) -> None:
        if not refines:
            return
        if self.model.machine is None:
            self.add("refines-scope", f"{label}: REFINES requires a MACHINE", span)
            return
        known = {e.label for e in self.model.machine.events}
        for r in refines:
            if r not in known:
                self.add("refines-scope",
                         f"{label}: refined event {r!r} not in machine", span)

    def check_stmt(self, stmt: Statement, visible: set[str],
                   writable: set[str], where: str) -> None:
        for item in seq_items(stmt):
            if isinstance(item, Sub):
                self.check_sub(item, visible, writable, where)
            elif isinstance(item, Assert):
                for _, p in item.conjuncts:
                    self.check_pred(p, visible, "unbound-name", where,
                                    primed_over=set())
            elif isinstance(item, If):
                for cond, body in item.branches:
                    self.check_pred(cond, visible, "unbound-name", where,
                                    primed_over=set())
                    self.check_stmt(body, visible, writable, where)
                if item.else_body is not None:
                    self.check_stmt(item.else_body, visible, writable, where)
            elif isinstance(item, While):
                self.check_pred(item.cond, visible, "unbound-name", where,
                                primed_over=set())
                for inv in item.invariants:
                    self.check_pred(inv.pred, visible, "unbound-name", where,
                                    primed_over=set())
                self.check_expr(item.variant, visible, where)
                self.check_stmt(item.body, visible, writable, where)
            elif isinstance(item, BeginEnd):
                inner = visible | set(item.locals)
                for inv in item.invariants:
                    self.check_pred(inv.pred, inner, "unbound-name", where,
                                    primed_over=set())
                self.check_stmt(item.body, inner, writable | set(item.locals), where)
            elif isinstance(item, Stop):
                pass

    def check_sub(self, sub: Sub, visible: set[str], writable: set[str],
                  where: str) -> None:
        written: set[str] = set()
        for part in sub.parts:
            for t in part.targets:
                if t not in writable:
                    self.add("bad-target",
                             f"{where}: {t!r} is not an assignable variable here",
                             part.span)
                if t in written:
                    self.add("parallel-clash",
                             f"{where}: parallel parts both write {t!r}", sub.span)
                written.add(t)
            if part.kind == "such":
                self.check_pred(part.rhs, visible, "unbound-name", where,
                                primed_over=set(part.targets))
            else:
                self.check_pred(part.rhs, visible, "unbound-name", where,
                                primed_over=set())

    def check_machine(self, consts: set[str], sets: set[str]) -> None:
        mach = self.model.machine
        assert mach is not None
        mvars = set(mach.variables)
        visible = consts | sets | mvars
        if len(mvars) != len(mach.variables):
            self.add("distinct-vars", "duplicate machine variables", mach.span)
        for np in mach.invariants:
            self.check_pred(np.pred, visible, "machine-scope",
                            f"{mach.name}.{np.label}", primed_over=set())
        self.check_init(mach.initialisation, mach.variables, consts | sets,
                        f"machine {mach.name}")
        for ev in mach.events:
            if ev.guard is not None:
                self.check_pred(ev.guard, visible, "machine-scope",
                                f"event {ev.label}", primed_over=set())
            self.check_sub(ev.action, visible, mvars, f"event {ev.label}")

    # types ----------------------------------------------------------------

    def check_types(self) -> None:
        if self.out:
            # scoping problems make inference noise; only type-check clean models
            has_scope_errors = any(d.rule in ("unbound-name", "axiom-scope",
                                              "invariant-scope", "rely-scope",
                                              "machine-scope")
                                   for d in self.out)
            if has_scope_errors:
                return
        info = self.info if self.info is not None else infer_types(self.model)
        for p in info.problems:
            self.add("type-error", p.message, p.span)


def validate_model(model: SlpModel, info: TypeInfo | None = None) -> list[Diagnostic]:
    return _Checker(model, info).run()
