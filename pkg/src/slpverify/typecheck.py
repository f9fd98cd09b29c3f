"""Monomorphic type inference for the mathematical subset.

Types: int, bool, given carrier sets, set-of-T, pair(T, U).  Functions are
finite sets of pairs.  Every declared variable and constant must resolve to
a ground type; failures become `type-error` diagnostics in validate.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit, Name,
                   Node, Quant, SetLit, Unary)
from .model import SlpModel
from .span import Span
from .stmt import (Assert, BeginEnd, If, Statement, Stop, Sub, While,
                   seq_items)

INT = ("int",)
BOOL = ("bool",)


def given(name: str) -> tuple:
    return ("given", name)


def set_of(t: tuple) -> tuple:
    return ("set", t)


def pair_of(a: tuple, b: tuple) -> tuple:
    return ("pair", a, b)


def type_text(t: tuple) -> str:
    tag = t[0]
    if tag == "int":
        return "INT"
    if tag == "bool":
        return "BOOL"
    if tag == "given":
        return t[1]
    if tag == "set":
        return f"POW({type_text(t[1])})"
    if tag == "pair":
        return f"{type_text(t[1])} x {type_text(t[2])}"
    return f"?{t[1]}"


@dataclass
class TypeProblem:
    message: str
    span: Span | None


@dataclass
class TypeInfo:
    """Resolved declaration types plus any inference failures."""

    constants: dict[str, tuple] = dc_field(default_factory=dict)
    sets: dict[str, tuple] = dc_field(default_factory=dict)
    globals: dict[str, tuple] = dc_field(default_factory=dict)
    machine_vars: dict[str, tuple] = dc_field(default_factory=dict)
    process_locals: dict[str, dict[str, tuple]] = dc_field(default_factory=dict)
    block_locals: dict[int, dict[str, tuple]] = dc_field(default_factory=dict)
    problems: list[TypeProblem] = dc_field(default_factory=list)

    def lookup(self, name: str) -> tuple | None:
        for table in (self.globals, self.constants, self.machine_vars):
            if name in table:
                return table[name]
        if name in self.sets:
            return self.sets[name]
        return None


class Unifier:
    def __init__(self) -> None:
        self.subst: dict[int, tuple] = {}
        self.counter = 0
        self.problems: list[TypeProblem] = []

    def fresh(self) -> tuple:
        self.counter += 1
        return ("var", self.counter)

    def find(self, t: tuple) -> tuple:
        while t[0] == "var" and t[1] in self.subst:
            t = self.subst[t[1]]
        return t

    def resolve(self, t: tuple) -> tuple:
        t = self.find(t)
        if t[0] == "set":
            return set_of(self.resolve(t[1]))
        if t[0] == "pair":
            return pair_of(self.resolve(t[1]), self.resolve(t[2]))
        return t

    def _occurs(self, vid: int, t: tuple) -> bool:
        t = self.find(t)
        if t[0] == "var":
            return t[1] == vid
        if t[0] == "set":
            return self._occurs(vid, t[1])
        if t[0] == "pair":
            return self._occurs(vid, t[1]) or self._occurs(vid, t[2])
        return False

    def unify(self, a: tuple, b: tuple, span: Span | None) -> None:
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if a[0] == "var":
            if self._occurs(a[1], b):
                self.problems.append(TypeProblem("recursive type", span))
                return
            self.subst[a[1]] = b
            return
        if b[0] == "var":
            self.unify(b, a, span)
            return
        if a[0] == b[0]:
            if a[0] == "set":
                self.unify(a[1], b[1], span)
                return
            if a[0] == "pair":
                self.unify(a[1], b[1], span)
                self.unify(a[2], b[2], span)
                return
            if a[0] == "given" and a[1] == b[1]:
                return
            if a[0] in ("int", "bool"):
                return
        self.problems.append(TypeProblem(
            f"type mismatch: {type_text(self.resolve(a))} vs {type_text(self.resolve(b))}",
            span))


class Inference:
    def __init__(self, model: SlpModel):
        self.model = model
        self.uni = Unifier()
        self.env: dict[str, tuple] = {}

    def run(self) -> TypeInfo:
        m = self.model
        uni = self.uni
        atom_sets: dict[str, str] = {}
        if m.check:
            for sname, atoms in m.check.sets:
                for a in atoms:
                    atom_sets[a] = sname
        self.atom_sets = atom_sets

        for s in m.context.sets:
            self.env[s] = set_of(given(s))
        for c in m.context.constants:
            self.env[c] = uni.fresh()
        for v in m.globals:
            self.env[v] = uni.fresh()
        mach = m.machine
        if mach:
            for v in mach.variables:
                if v not in self.env:
                    self.env[v] = uni.fresh()

        for ax in m.context.axioms:
            self.pred(ax.pred, self.env)
        for inv in m.invariants:
            self.pred(inv.pred, self.env)
        if m.initialisation:
            self.sub(m.initialisation, self.env)
        if m.check:
            for cname, value in m.check.consts:
                if cname in self.env:
                    t = self.literal_type(value)
                    if t is not None:
                        uni.unify(self.env[cname], t, value.span)
        for env_def in m.environments:
            for np in env_def.relies + env_def.guarantees:
                self.pred(np.pred, self.env)
        proc_locals: dict[str, dict[str, tuple]] = {}
        block_locals: dict[int, dict[str, tuple]] = {}
        for proc in m.processes:
            penv = dict(self.env)
            ptypes: dict[str, tuple] = {}
            for u in proc.locals:
                ptypes[u] = uni.fresh()
                penv[u] = ptypes[u]
            proc_locals[proc.label] = ptypes
            for np in proc.relies + proc.guarantees:
                self.pred(np.pred, self.env)  # globals only; enforced by validate
            for inv in proc.invariants:
                self.pred(inv.pred, penv)
            if proc.body is not None:
                self.block(proc.body, penv, (proc.label,), block_locals)
        if mach:
            for np in mach.invariants:
                self.pred(np.pred, self.env)
            self.sub(mach.initialisation, self.env)
            for ev in mach.events:
                if ev.guard is not None:
                    self.pred(ev.guard, self.env)
                self.sub(ev.action, self.env)

        info = TypeInfo()
        info.problems = uni.problems
        for s in m.context.sets:
            info.sets[s] = set_of(given(s))
        for c in m.context.constants:
            info.constants[c] = self._ground(c, self.env[c])
        for v in m.globals:
            info.globals[v] = self._ground(v, self.env[v])
        if mach:
            for v in mach.variables:
                info.machine_vars[v] = self._ground(v, self.env[v])
        for label, table in proc_locals.items():
            info.process_locals[label] = {
                u: self._ground(u, t) for u, t in table.items()}
        for path, table in block_locals.items():
            info.block_locals[path] = {
                w: self._ground(w, t) for w, t in table.items()}
        return info

    def _ground(self, name: str, t: tuple) -> tuple:
        r = self.uni.resolve(t)
        if self._has_var(r):
            self.uni.problems.append(TypeProblem(
                f"cannot infer a ground type for {name!r}", None))
        return r

    def _has_var(self, t: tuple) -> bool:
        if t[0] == "var":
            return True
        if t[0] == "set":
            return self._has_var(t[1])
        if t[0] == "pair":
            return self._has_var(t[1]) or self._has_var(t[2])
        return False

    # node walks -----------------------------------------------------------

    def literal_type(self, node: Node) -> tuple | None:
        """Structural type of a closed CHECK value literal."""
        if isinstance(node, IntLit):
            return INT
        if isinstance(node, Unary) and node.op == "neg":
            return INT
        if isinstance(node, BoolLit):
            return BOOL
        if isinstance(node, Name) and node.text in self.atom_sets:
            return given(self.atom_sets[node.text])
        if isinstance(node, Binary):
            if node.op == "maplet":
                a = self.literal_type(node.left)
                b = self.literal_type(node.right)
                if a and b:
                    return pair_of(a, b)
                return None
            if node.op == "upto":
                return set_of(INT)
        if isinstance(node, SetLit):
            if not node.items:
                return None
            t = self.literal_type(node.items[0])
            return set_of(t) if t else None
        return None

    def pred(self, node: Node, env: dict[str, tuple]) -> None:
        self.uni.unify(self.expr(node, env), BOOL, node.span)

    def expr(self, node: Node, env: dict[str, tuple]) -> tuple:
        uni = self.uni
        if isinstance(node, IntLit):
            return INT
        if isinstance(node, BoolLit):
            return BOOL
        if isinstance(node, Name):
            t = env.get(node.text)
            if t is None:
                # unknown names are reported by validate; stay permissive here
                t = uni.fresh()
                env[node.text] = t
            return t
        if isinstance(node, BaseSet):
            return set_of(BOOL) if node.name == "BOOL" else set_of(INT)
        if isinstance(node, Unary):
            if node.op == "neg":
                uni.unify(self.expr(node.operand, env), INT, node.span)
                return INT
            uni.unify(self.expr(node.operand, env), BOOL, node.span)
            return BOOL
        if isinstance(node, BoolCast):
            self.pred(node.pred, env)
            return BOOL
        if isinstance(node, Quant):
            inner = dict(env)
            for n in node.names:
                inner[n] = uni.fresh()
            self.pred(node.body, inner)
            return BOOL
        if isinstance(node, SetLit):
            elem = uni.fresh()
            for item in node.items:
                uni.unify(self.expr(item, env), elem, item.span)
            return set_of(elem)
        if isinstance(node, Apply):
            a, b = uni.fresh(), uni.fresh()
            uni.unify(self.expr(node.fn, env), set_of(pair_of(a, b)), node.span)
            uni.unify(self.expr(node.arg, env), a, node.span)
            return b
        if isinstance(node, Binary):
            lt = self.expr(node.left, env)
            rt = self.expr(node.right, env)
            op = node.op
            if op in ("+", "-", "*", "div", "mod"):
                uni.unify(lt, INT, node.span)
                uni.unify(rt, INT, node.span)
                return INT
            if op in ("<", "<=", ">", ">="):
                uni.unify(lt, INT, node.span)
                uni.unify(rt, INT, node.span)
                return BOOL
            if op in ("=", "/="):
                uni.unify(lt, rt, node.span)
                return BOOL
            if op in ("in", "notin"):
                uni.unify(set_of(lt), rt, node.span)
                return BOOL
            if op == "subset":
                uni.unify(lt, rt, node.span)
                uni.unify(lt, set_of(uni.fresh()), node.span)
                return BOOL
            if op in ("union", "inter", "diff"):
                uni.unify(lt, rt, node.span)
                uni.unify(lt, set_of(uni.fresh()), node.span)
                return lt
            if op == "upto":
                uni.unify(lt, INT, node.span)
                uni.unify(rt, INT, node.span)
                return set_of(INT)
            if op == "maplet":
                return pair_of(lt, rt)
            if op in ("and", "or", "=>", "<=>"):
                uni.unify(lt, BOOL, node.span)
                uni.unify(rt, BOOL, node.span)
                return BOOL
        raise TypeError(f"unhandled node {node!r}")

    def sub(self, sub: Sub, env: dict[str, tuple]) -> None:
        uni = self.uni
        for part in sub.parts:
            if part.kind == "eq":
                t = env.setdefault(part.targets[0], uni.fresh())
                uni.unify(t, self.expr(part.rhs, env), part.span)
            elif part.kind == "in":
                t = env.setdefault(part.targets[0], uni.fresh())
                uni.unify(set_of(t), self.expr(part.rhs, env), part.span)
            else:
                self.pred(part.rhs, env)

    def block(self, body: Statement, env: dict[str, tuple],
              path: tuple, block_locals: dict[int, dict[str, tuple]]) -> None:
        """Walk a block; the i-th flattened action lives at path + (i,)."""
        for i, item in enumerate(seq_items(body)):
            self.stmt(item, env, path + (i,), block_locals)

    def stmt(self, stmt: Statement, env: dict[str, tuple],
             path: tuple, block_locals: dict[int, dict[str, tuple]]) -> None:
        if isinstance(stmt, Sub):
            self.sub(stmt, env)
        elif isinstance(stmt, If):
            for i, (cond, body) in enumerate(stmt.branches):
                self.pred(cond, env)
                self.block(body, env, path + (("then", i),), block_locals)
            if stmt.else_body is not None:
                self.block(stmt.else_body, env, path + (("else",),), block_locals)
        elif isinstance(stmt, While):
            self.pred(stmt.cond, env)
            for inv in stmt.invariants:
                self.pred(inv.pred, env)
            self.uni.unify(self.expr(stmt.variant, env), INT, stmt.variant.span)
            self.block(stmt.body, env, path + (("loop",),), block_locals)
        elif isinstance(stmt, BeginEnd):
            inner = dict(env)
            table: dict[str, tuple] = {}
            for w in stmt.locals:
                table[w] = self.uni.fresh()
                inner[w] = table[w]
            block_locals[id(stmt)] = table
            for inv in stmt.invariants:
                self.pred(inv.pred, inner)
            self.block(stmt.body, inner, path + (("block",),), block_locals)
        elif isinstance(stmt, Assert):
            for _, p in stmt.conjuncts:
                self.pred(p, env)
        elif isinstance(stmt, Stop):
            pass
        else:
            raise TypeError(f"unhandled statement {stmt!r}")


def infer_types(model: SlpModel) -> TypeInfo:
    return Inference(model).run()
