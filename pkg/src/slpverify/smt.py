"""SMT-LIB v2 export of proof obligations.

Encoding: integers as Int with the CHECK interval asserted on every integer
symbol and quantifier (so a solver verdict matches the finite check), carrier
sets as finite sorts, set values as characteristic predicates, extensional
function constants as uninterpreted functions with one defining equation per
graph entry.  Integer division uses SMT `div`, which differs from the
kernel's truncation only on negative operands.

For universally read obligations the script asserts the hypotheses and the
negated goal: unsat means discharged.  WD is existential; its script asserts
the goal positively and sat means discharged (noted in the header).
"""

from __future__ import annotations

from .errors import SlpError
from .expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit, Name,
                   Node, Quant, SetLit, Unary, conjuncts_of)
from .kernel import Atom, Interpretation, value_text
from .obligations import ProofObligation
from .session import Session


def _unsupported(why: str) -> SlpError:
    return SlpError("unsupported-construct", why)


def _sym(name: str, primes: int) -> str:
    if primes == 0:
        return name
    return "|" + name + "'" * primes + "|"


class Exporter:
    def __init__(self, session: Session, po: ProofObligation):
        self.session = session
        self.po = po
        self.interp = session.interp
        self.scope = po.form.scope
        self.lines: list[str] = []
        self.decls: list[str] = []
        self.asserts: list[str] = []
        self._declared: set[str] = set()
        self._funs: dict[str, tuple] = {}

    # sorts -----------------------------------------------------------------

    def sort_text(self, t: tuple) -> str:
        if t == ("int",):
            return "Int"
        if t == ("bool",):
            return "Bool"
        if t[0] == "given":
            return t[1]
        raise _unsupported(f"no SMT sort for type {t!r}")

    def type_of_name(self, name: str) -> tuple | None:
        info = self.session.info
        if self.scope is not None and self.scope.has_var(name):
            return self.scope.type_of(name)
        return info.lookup(name)

    def sort_of(self, node: Node) -> tuple | None:
        """Lightweight type synthesis; None when unknown."""
        if isinstance(node, IntLit):
            return ("int",)
        if isinstance(node, BoolLit) or isinstance(node, BoolCast):
            return ("bool",)
        if isinstance(node, Name):
            return self.type_of_name(node.text)
        if isinstance(node, BaseSet):
            return ("set", ("bool",)) if node.name == "BOOL" else ("set", ("int",))
        if isinstance(node, Unary):
            return ("int",) if node.op == "neg" else ("bool",)
        if isinstance(node, SetLit):
            for item in node.items:
                t = self.sort_of(item)
                if t is not None:
                    return ("set", t)
            return None
        if isinstance(node, Binary):
            op = node.op
            if op in ("+", "-", "*", "div", "mod"):
                return ("int",)
            if op in ("and", "or", "=>", "<=>", "=", "/=", "<", "<=", ">",
                      ">=", "in", "notin", "subset"):
                return ("bool",)
            if op == "upto":
                return ("set", ("int",))
            if op in ("union", "inter", "diff"):
                return self.sort_of(node.left) or self.sort_of(node.right)
            if op == "maplet":
                lt, rt = self.sort_of(node.left), self.sort_of(node.right)
                if lt and rt:
                    return ("pair", lt, rt)
                return None
        if isinstance(node, Apply):
            ft = self.sort_of(node.fn)
            if ft and ft[0] == "set" and ft[1][0] == "pair":
                return ft[1][2]
            return None
        if isinstance(node, Quant):
            return ("bool",)
        return None

    # declarations -------------------------------------------------------------

    def declare_carriers(self) -> None:
        for sname, atoms in self.interp.sets:
            self.decls.append(f"(declare-sort {sname} 0)")
            names = []
            for a in atoms:
                self.decls.append(f"(declare-fun {a.name} () {sname})")
                names.append(a.name)
            if len(names) > 1:
                self.decls.append(f"(assert (distinct {' '.join(names)}))")
            closure = " ".join(f"(= x {n})" for n in names)
            self.decls.append(
                f"(assert (forall ((x {sname})) (or {closure})))"
                if len(names) > 1 else
                f"(assert (forall ((x {sname})) (= x {names[0]})))")

    def declare_constant(self, name: str) -> None:
        if name in self._declared:
            return
        value = self.interp.const_value(name)
        t = self.session.info.constants.get(name)
        if value is None or t is None:
            raise _unsupported(f"constant {name!r} has no CHECK value")
        self._declared.add(name)
        if t == ("int",):
            self.decls.append(f"(define-fun {name} () Int {_int_text(value)})")
        elif t == ("bool",):
            self.decls.append(
                f"(define-fun {name} () Bool {'true' if value else 'false'})")
        elif t[0] == "given":
            assert isinstance(value, Atom)
            self.decls.append(f"(define-fun {name} () {t[1]} {value.name})")
        elif t[0] == "set" and t[1][0] == "pair":
            self._declare_function_graph(name, t, value)
        elif t[0] == "set":
            elem = self.sort_text(t[1])
            body = self._value_membership(value, "x")
            self.decls.append(
                f"(define-fun {name} ((x {elem})) Bool {body})")
        else:
            raise _unsupported(f"constant {name!r} of type {t!r}")

    def _flat_arg_sorts(self, t: tuple) -> list[str]:
        if t[0] == "pair":
            return self._flat_arg_sorts(t[1]) + self._flat_arg_sorts(t[2])
        return [self.sort_text(t)]

    def _flat_value(self, v) -> list[str]:
        if isinstance(v, tuple):
            return self._flat_value(v[0]) + self._flat_value(v[1])
        if isinstance(v, Atom):
            return [v.name]
        if isinstance(v, bool):
            return ["true" if v else "false"]
        if isinstance(v, int):
            return [_int_text(v)]
        raise _unsupported(f"cannot flatten value {value_text(v)}")

    def _declare_function_graph(self, name: str, t: tuple, value) -> None:
        key_t, out_t = t[1][1], t[1][2]
        args = self._flat_arg_sorts(key_t)
        self._funs[name] = (key_t, out_t)
        self.decls.append(
            f"(declare-fun {name} ({' '.join(args)}) {self.sort_text(out_t)})")
        from .kernel import value_key
        for item in sorted(value, key=value_key):
            k, v = item
            flat = self._flat_value(k)
            rhs = self._flat_value(v)
            if len(rhs) != 1:
                raise _unsupported("function results must be scalar for export")
            self.decls.append(
                f"(assert (= ({name} {' '.join(flat)}) {rhs[0]}))")

    def declare_state_symbol(self, name: str, primes: int) -> None:
        sym = _sym(name, primes)
        if sym in self._declared:
            return
        t = self.type_of_name(name)
        if t is None:
            raise _unsupported(f"cannot type symbol {name!r}")
        self._declared.add(sym)
        if t == ("int",):
            self.decls.append(f"(declare-fun {sym} () Int)")
            self.asserts.append(
                f"(assert (and (<= {_int_text(self.interp.lo)} {sym})"
                f" (<= {sym} {_int_text(self.interp.hi)})))")
        elif t == ("bool",):
            self.decls.append(f"(declare-fun {sym} () Bool)")
        elif t[0] == "given":
            self.decls.append(f"(declare-fun {sym} () {t[1]})")
        elif t[0] == "set" and t[1][0] != "pair":
            elem = self.sort_text(t[1])
            self.decls.append(f"(declare-fun {sym} ({elem}) Bool)")
            if t[1] == ("int",):
                self.asserts.append(
                    f"(assert (forall ((x Int)) (=> ({sym} x)"
                    f" (and (<= {_int_text(self.interp.lo)} x)"
                    f" (<= x {_int_text(self.interp.hi)})))))")
        else:
            raise _unsupported(f"variable {name!r} of type {t!r}")

    # terms -----------------------------------------------------------------------

    def term(self, node: Node, bound: dict[str, tuple]) -> str:
        if isinstance(node, IntLit):
            return _int_text(node.value)
        if isinstance(node, BoolLit):
            return "true" if node.value else "false"
        if isinstance(node, Name):
            if node.text in bound and node.primes == 0:
                return node.text
            if node.text in {n for n, _ in self.interp.consts} \
                    or self.interp.set_atoms(node.text) is not None:
                if node.primes:
                    raise _unsupported("primed constant")
                self.declare_constant(node.text)
                t = self.session.info.constants.get(node.text)
                if t and t[0] == "set":
                    raise _unsupported(
                        f"set constant {node.text!r} used as a term")
                return node.text
            self.declare_state_symbol(node.text, node.primes)
            return _sym(node.text, node.primes)
        if isinstance(node, Unary):
            if node.op == "neg":
                return f"(- {self.term(node.operand, bound)})"
            return f"(not {self.term(node.operand, bound)})"
        if isinstance(node, BoolCast):
            return self.term(node.pred, bound)
        if isinstance(node, Quant):
            return self._quant(node, bound)
        if isinstance(node, Apply):
            return self._apply(node, bound)
        if isinstance(node, Binary):
            return self._binary(node, bound)
        raise _unsupported(f"cannot export node {type(node).__name__}")

    _SIMPLE = {"+": "+", "-": "-", "*": "*", "div": "div", "mod": "mod",
               "<": "<", "<=": "<=", ">": ">", ">=": ">=",
               "and": "and", "or": "or", "=>": "=>", "<=>": "="}

    def _binary(self, node: Binary, bound: dict[str, tuple]) -> str:
        op = node.op
        if op in self._SIMPLE:
            return (f"({self._SIMPLE[op]} {self.term(node.left, bound)}"
                    f" {self.term(node.right, bound)})")
        if op in ("in", "notin"):
            mem = self.membership(self.term(node.left, bound), node.right, bound)
            return mem if op == "in" else f"(not {mem})"
        if op in ("=", "/="):
            lt = self.sort_of(node.left) or self.sort_of(node.right)
            if lt is not None and lt[0] == "set":
                eq = self._set_equality(node.left, node.right, lt, bound)
            else:
                eq = (f"(= {self.term(node.left, bound)}"
                      f" {self.term(node.right, bound)})")
            return eq if op == "=" else f"(not {eq})"
        if op == "subset":
            lt = self.sort_of(node.left) or self.sort_of(node.right)
            if lt is None or lt[0] != "set":
                raise _unsupported("cannot type a subset operand")
            elem = self.sort_text(lt[1])
            lm = self.membership("x", node.left, bound)
            rm = self.membership("x", node.right, bound)
            return f"(forall ((x {elem})) (=> {lm} {rm}))"
        raise _unsupported(f"operator {op!r} outside a membership position")

    def _set_equality(self, a: Node, b: Node, t: tuple, bound) -> str:
        elem = self.sort_text(t[1])
        am = self.membership("x", a, bound)
        bm = self.membership("x", b, bound)
        return f"(forall ((x {elem})) (= {am} {bm}))"

    def membership(self, x: str, e: Node, bound: dict[str, tuple]) -> str:
        """Characteristic-predicate translation of `x : e`."""
        if isinstance(e, BaseSet):
            if e.name == "BOOL":
                return "true"
            lo = max(0, self.interp.lo) if e.name == "NAT" else self.interp.lo
            return (f"(and (<= {_int_text(lo)} {x})"
                    f" (<= {x} {_int_text(self.interp.hi)}))")
        if isinstance(e, Name) and e.primes == 0:
            if self.interp.set_atoms(e.text) is not None:
                return "true"  # carrier sets cover their sort
            t = self.type_of_name(e.text)
            if t is not None and t[0] == "set":
                if e.text in {n for n, _ in self.interp.consts}:
                    self.declare_constant(e.text)
                else:
                    self.declare_state_symbol(e.text, 0)
                    return f"({_sym(e.text, 0)} {x})"
                return f"({e.text} {x})"
        if isinstance(e, Name) and e.primes > 0:
            t = self.type_of_name(e.text)
            if t is not None and t[0] == "set":
                self.declare_state_symbol(e.text, e.primes)
                return f"({_sym(e.text, e.primes)} {x})"
        if isinstance(e, SetLit):
            if not e.items:
                return "false"
            parts = [f"(= {x} {self.term(i, bound)})" for i in e.items]
            return parts[0] if len(parts) == 1 else f"(or {' '.join(parts)})"
        if isinstance(e, Binary):
            if e.op == "upto":
                return (f"(and (<= {self.term(e.left, bound)} {x})"
                        f" (<= {x} {self.term(e.right, bound)}))")
            if e.op == "union":
                return (f"(or {self.membership(x, e.left, bound)}"
                        f" {self.membership(x, e.right, bound)})")
            if e.op == "inter":
                return (f"(and {self.membership(x, e.left, bound)}"
                        f" {self.membership(x, e.right, bound)})")
            if e.op == "diff":
                return (f"(and {self.membership(x, e.left, bound)}"
                        f" (not {self.membership(x, e.right, bound)}))")
        raise _unsupported("membership in an unencodable set expression")

    def _quant(self, node: Quant, bound: dict[str, tuple]) -> str:
        inner = dict(bound)
        binders = []
        guards = []
        pool = conjuncts_of(node.body.left) \
            if isinstance(node.body, Binary) and node.body.op == "=>" \
            else conjuncts_of(node.body)
        for n in node.names:
            constraint = None
            for c in pool:
                if (isinstance(c, Binary) and c.op == "in"
                        and isinstance(c.left, Name) and c.left.text == n
                        and c.left.primes == 0):
                    constraint = c.right
                    break
            sort = "Int"
            if constraint is not None:
                t = self.sort_of(constraint)
                if t is not None and t[0] == "set":
                    try:
                        sort = self.sort_text(t[1])
                    except SlpError:
                        sort = "Int"
            binders.append(f"({n} {sort})")
            inner[n] = (sort,)
            if sort == "Int":
                guards.append(
                    f"(and (<= {_int_text(self.interp.lo)} {n})"
                    f" (<= {n} {_int_text(self.interp.hi)}))")
        body = self.term(node.body, inner)
        guard = " ".join(guards)
        if guards:
            if node.kind == "forall":
                body = f"(=> (and {guard}) {body})" if len(guards) > 1 \
                    else f"(=> {guards[0]} {body})"
            else:
                body = f"(and {guard} {body})" if len(guards) > 1 \
                    else f"(and {guards[0]} {body})"
        head = "forall" if node.kind == "forall" else "exists"
        return f"({head} ({' '.join(binders)}) {body})"

    def _apply(self, node: Apply, bound: dict[str, tuple]) -> str:
        if not isinstance(node.fn, Name) or node.fn.primes != 0:
            raise _unsupported("only named constants can be applied")
        name = node.fn.text
        if self.interp.const_value(name) is None:
            raise _unsupported(f"applied symbol {name!r} is not a CHECK constant")
        self.declare_constant(name)

        def flatten(arg: Node) -> list[str]:
            if isinstance(arg, Binary) and arg.op == "maplet":
                return flatten(arg.left) + flatten(arg.right)
            return [self.term(arg, bound)]

        args = flatten(node.arg)
        return f"({name} {' '.join(args)})"

    # script ------------------------------------------------------------------------

    def export(self) -> str:
        po = self.po
        existential = po.family == "WD" and not self.session.options.strict_feasibility
        if po.goal is None:
            raise _unsupported(f"{po.id}: no first-order sequent form")
        if po.family == "VAR" and not any(lbl == "body" for lbl, _ in po.hypotheses):
            raise _unsupported(f"{po.id}: loop body has no first-order form")
        self.declare_carriers()
        hyp_terms = []
        for label, pred in po.hypotheses:
            hyp_terms.append((label, self.term(pred, {})))
        goal_term = self.term(po.goal, {})
        out = [f"; PO {po.id} [{po.family}]"]
        if existential:
            out.append("; existential well-definedness: sat = discharged,"
                       " unsat = violated")
        else:
            out.append("; unsat = discharged")
        out.append("(set-logic ALL)")
        out.extend(self.decls)
        out.extend(self.asserts)
        for label, term in hyp_terms:
            out.append(f"; hyp {label}")
            out.append(f"(assert {term})")
        out.append("; goal")
        if existential:
            out.append(f"(assert {goal_term})")
        else:
            out.append(f"(assert (not {goal_term}))")
        out.append("(check-sat)")
        return "\n".join(out) + "\n"


def _int_text(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


def export_solver(po: ProofObligation, session: Session) -> str:
    """One SMT-LIB v2 script for one PO; raises unsupported-construct."""
    return Exporter(session, po).export()
