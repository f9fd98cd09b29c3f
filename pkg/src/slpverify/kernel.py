"""Finite evaluation kernel: values, interpretations, states and satisfaction sets.

Expressions are compiled once per scope into closures over
(pre_state, post_state, local_stack); enumeration and relation building then
run the closures per state.  Python ints/bools/frozensets/tuples carry the
value space; the type checker keeps bool and int apart, so Python's
bool-is-int aliasing can never mix well-typed values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .errors import EvalError, SlpError, StateSpaceExceeded
from .expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit, Name,
                   Node, Quant, SetLit, Unary, conjuncts_of)
from .model import Context, SlpModel
from .scopes import ScopeContext, ScopeLayer

Value = object  # int | bool | Atom | frozenset | tuple(pair)


@dataclass(frozen=True)
class Atom:
    """Element of a carrier set, named in the CHECK section."""

    set_name: str
    name: str

    def __repr__(self) -> str:
        return self.name


def value_key(v: Value):
    """Total deterministic order over all values."""
    if isinstance(v, bool):
        return (1, v)
    if isinstance(v, int):
        return (0, v)
    if isinstance(v, Atom):
        return (2, v.set_name, v.name)
    if isinstance(v, frozenset):
        return (3, len(v), tuple(sorted(value_key(x) for x in v)))
    if isinstance(v, tuple):
        return (4, value_key(v[0]), value_key(v[1]))
    raise TypeError(f"not a value: {v!r}")


def value_text(v: Value) -> str:
    """Print a value in the concrete expression syntax."""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Atom):
        return v.name
    if isinstance(v, frozenset):
        items = sorted(v, key=value_key)
        return "{" + ", ".join(value_text(x) for x in items) + "}"
    if isinstance(v, tuple):
        return f"({value_text(v[0])} |-> {value_text(v[1])})"
    raise TypeError(f"not a value: {v!r}")


@dataclass(frozen=True)
class Interpretation:
    """Finite bindings for carrier sets and constants plus the INT interval."""

    bound: tuple[int, int]
    sets: tuple[tuple[str, tuple[Atom, ...]], ...] = ()
    consts: tuple[tuple[str, Value], ...] = ()

    @property
    def lo(self) -> int:
        return self.bound[0]

    @property
    def hi(self) -> int:
        return self.bound[1]

    def int_domain(self) -> frozenset:
        return frozenset(range(self.lo, self.hi + 1))

    def nat_domain(self) -> frozenset:
        return frozenset(range(max(0, self.lo), self.hi + 1))

    def set_atoms(self, name: str) -> tuple[Atom, ...] | None:
        for n, atoms in self.sets:
            if n == name:
                return atoms
        return None

    def const_value(self, name: str) -> Value | None:
        for n, v in self.consts:
            if n == name:
                return v
        return None

    def const_table(self) -> dict[str, Value]:
        table: dict[str, Value] = {n: v for n, v in self.consts}
        for n, atoms in self.sets:
            table[n] = frozenset(atoms)
        return table


def _eval_literal(node: Node, atoms: dict[str, Atom]) -> Value:
    """Evaluate a closed CHECK value literal."""
    if isinstance(node, IntLit):
        return node.value
    if isinstance(node, BoolLit):
        return node.value
    if isinstance(node, Unary) and node.op == "neg":
        v = _eval_literal(node.operand, atoms)
        if not isinstance(v, int) or isinstance(v, bool):
            raise SlpError("bad-check-value", "negation of a non-integer literal",
                           node.span)
        return -v
    if isinstance(node, Name) and node.primes == 0:
        if node.text in atoms:
            return atoms[node.text]
        raise SlpError("bad-check-value", f"unknown atom {node.text!r}", node.span)
    if isinstance(node, Binary):
        if node.op == "maplet":
            return (_eval_literal(node.left, atoms), _eval_literal(node.right, atoms))
        if node.op == "upto":
            a = _eval_literal(node.left, atoms)
            b = _eval_literal(node.right, atoms)
            if isinstance(a, int) and isinstance(b, int):
                return frozenset(range(a, b + 1))
    if isinstance(node, SetLit):
        return frozenset(_eval_literal(i, atoms) for i in node.items)
    raise SlpError("bad-check-value", "unsupported CHECK value literal", node.span)


def build_interpretation(model: SlpModel) -> Interpretation:
    """Build and sanity-check the interpretation from the model's CHECK section."""
    check = model.check
    if check is None or check.bound is None:
        raise SlpError("no-check", "model has no CHECK section with an INT bound")
    atom_table: dict[str, Atom] = {}
    sets: list[tuple[str, tuple[Atom, ...]]] = []
    declared_sets = set(model.context.sets)
    for sname, atom_names in check.sets:
        if sname not in declared_sets:
            raise SlpError("bad-check-value", f"CHECK SET {sname!r} not declared",
                           check.span)
        atoms = []
        for a in atom_names:
            if a in atom_table:
                raise SlpError("bad-check-value", f"atom {a!r} declared twice",
                               check.span)
            atom = Atom(sname, a)
            atom_table[a] = atom
            atoms.append(atom)
        sets.append((sname, tuple(atoms)))
    bound_sets = {n for n, _ in sets}
    for s in model.context.sets:
        if s not in bound_sets:
            raise SlpError("bad-check-value", f"carrier set {s!r} has no CHECK SET",
                           check.span)
    consts: list[tuple[str, Value]] = []
    declared_consts = set(model.context.constants)
    for cname, literal in check.consts:
        if cname not in declared_consts:
            raise SlpError("bad-check-value",
                           f"CHECK CONST {cname!r} not declared", check.span)
        consts.append((cname, _eval_literal(literal, atom_table)))
    bound_consts = {n for n, _ in consts}
    for c in model.context.constants:
        if c not in bound_consts:
            raise SlpError("bad-check-value", f"constant {c!r} has no CHECK CONST",
                           check.span)
    return Interpretation(check.bound, tuple(sets), tuple(consts))


# ---------------------------------------------------------------------------
# domains

def type_domain(t: tuple, interp: Interpretation, cap: int) -> list:
    """All values of a ground type, sorted; the raw domain of a variable."""
    tag = t[0]
    if tag == "int":
        return list(range(interp.lo, interp.hi + 1))
    if tag == "bool":
        return [False, True]
    if tag == "given":
        atoms = interp.set_atoms(t[1])
        if atoms is None:
            raise EvalError("unbound-name", f"carrier set {t[1]!r} has no atoms")
        return sorted(atoms, key=value_key)
    if tag == "set":
        elems = type_domain(t[1], interp, cap)
        if len(elems) > 20 or 2 ** len(elems) > cap:
            raise StateSpaceExceeded(2 ** min(len(elems), 63), cap)
        out = []
        for r in range(len(elems) + 1):
            for combo in itertools.combinations(elems, r):
                out.append(frozenset(combo))
        return sorted(out, key=value_key)
    if tag == "pair":
        left = type_domain(t[1], interp, cap)
        right = type_domain(t[2], interp, cap)
        if len(left) * len(right) > cap:
            raise StateSpaceExceeded(len(left) * len(right), cap)
        return [(a, b) for a in left for b in right]
    raise EvalError("unbound-name", f"variable has no ground type: {t!r}")


# ---------------------------------------------------------------------------
# compilation

def _div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("div-by-zero", "division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _mod(a: int, b: int) -> int:
    return a - b * _div(a, b)


class Compiler:
    """Compiles expressions to closures fn(pre, post, loc) for one scope."""

    def __init__(self, scope: ScopeContext, interp: Interpretation,
                 extra_consts: Mapping[str, Value] | None = None):
        self.scope = scope
        self.interp = interp
        self.var_index = {name: i for i, (name, _) in enumerate(scope.types)}
        self.consts = interp.const_table()
        if extra_consts:
            self.consts.update(extra_consts)
        self._cache: dict[int, Callable] = {}

    def compile(self, node: Node) -> Callable:
        fn = self._cache.get(id(node))
        if fn is None:
            fn = self._build(node, {})
            self._cache[id(node)] = fn
        return fn

    def _build(self, node: Node, locals_: dict[str, int]) -> Callable:
        if isinstance(node, IntLit):
            v = node.value
            return lambda pre, post, loc: v
        if isinstance(node, BoolLit):
            v = node.value
            return lambda pre, post, loc: v
        if isinstance(node, Name):
            text = node.text
            if node.primes == 0:
                if text in locals_:
                    k = locals_[text]
                    return lambda pre, post, loc: loc[k]
                if text in self.var_index:
                    i = self.var_index[text]
                    return lambda pre, post, loc: pre[i]
                if text in self.consts:
                    v = self.consts[text]
                    return lambda pre, post, loc: v
                raise EvalError("unbound-name", f"unbound name {text!r}", node.span)
            if node.primes == 1:
                if text in self.var_index:
                    i = self.var_index[text]

                    def primed(pre, post, loc, _i=i, _t=text):
                        if post is None:
                            raise EvalError("unbound-name",
                                            f"{_t}' used outside a before-after context")
                        return post[_i]
                    return primed
                raise EvalError("unbound-name", f"unbound primed name {text!r}",
                                node.span)
            raise EvalError("unbound-name", "double primes are not evaluable",
                            node.span)
        if isinstance(node, BaseSet):
            if node.name == "INT":
                v = self.interp.int_domain()
            elif node.name == "NAT":
                v = self.interp.nat_domain()
            else:
                v = frozenset((False, True))
            return lambda pre, post, loc: v
        if isinstance(node, Unary):
            inner = self._build(node.operand, locals_)
            if node.op == "neg":
                return lambda pre, post, loc: -inner(pre, post, loc)
            return lambda pre, post, loc: not inner(pre, post, loc)
        if isinstance(node, BoolCast):
            return self._build(node.pred, locals_)
        if isinstance(node, Binary):
            return self._binary(node, locals_)
        if isinstance(node, SetLit):
            items = [self._build(i, locals_) for i in node.items]
            return lambda pre, post, loc: frozenset(f(pre, post, loc) for f in items)
        if isinstance(node, Apply):
            return self._apply(node, locals_)
        if isinstance(node, Quant):
            return self._quant(node, locals_)
        raise EvalError("unbound-name", f"cannot compile {node!r}", node.span)

    def _binary(self, node: Binary, locals_: dict[str, int]) -> Callable:
        op = node.op
        if op == "and":
            lf = self._build(node.left, locals_)
            rf = self._build(node.right, locals_)
            return lambda pre, post, loc: lf(pre, post, loc) and rf(pre, post, loc)
        if op == "or":
            lf = self._build(node.left, locals_)
            rf = self._build(node.right, locals_)
            return lambda pre, post, loc: lf(pre, post, loc) or rf(pre, post, loc)
        if op == "=>":
            lf = self._build(node.left, locals_)
            rf = self._build(node.right, locals_)
            return lambda pre, post, loc: (not lf(pre, post, loc)) or rf(pre, post, loc)
        if op == "<=>":
            lf = self._build(node.left, locals_)
            rf = self._build(node.right, locals_)
            return lambda pre, post, loc: lf(pre, post, loc) == rf(pre, post, loc)
        lf = self._build(node.left, locals_)
        rf = self._build(node.right, locals_)
        if op == "+":
            return lambda pre, post, loc: lf(pre, post, loc) + rf(pre, post, loc)
        if op == "-":
            return lambda pre, post, loc: lf(pre, post, loc) - rf(pre, post, loc)
        if op == "*":
            return lambda pre, post, loc: lf(pre, post, loc) * rf(pre, post, loc)
        if op == "div":
            return lambda pre, post, loc: _div(lf(pre, post, loc), rf(pre, post, loc))
        if op == "mod":
            return lambda pre, post, loc: _mod(lf(pre, post, loc), rf(pre, post, loc))
        if op == "=":
            return lambda pre, post, loc: lf(pre, post, loc) == rf(pre, post, loc)
        if op == "/=":
            return lambda pre, post, loc: lf(pre, post, loc) != rf(pre, post, loc)
        if op == "<":
            return lambda pre, post, loc: lf(pre, post, loc) < rf(pre, post, loc)
        if op == "<=":
            return lambda pre, post, loc: lf(pre, post, loc) <= rf(pre, post, loc)
        if op == ">":
            return lambda pre, post, loc: lf(pre, post, loc) > rf(pre, post, loc)
        if op == ">=":
            return lambda pre, post, loc: lf(pre, post, loc) >= rf(pre, post, loc)
        if op == "in":
            return lambda pre, post, loc: lf(pre, post, loc) in rf(pre, post, loc)
        if op == "notin":
            return lambda pre, post, loc: lf(pre, post, loc) not in rf(pre, post, loc)
        if op == "subset":
            return lambda pre, post, loc: lf(pre, post, loc) <= rf(pre, post, loc)
        if op == "union":
            return lambda pre, post, loc: lf(pre, post, loc) | rf(pre, post, loc)
        if op == "inter":
            return lambda pre, post, loc: lf(pre, post, loc) & rf(pre, post, loc)
        if op == "diff":
            return lambda pre, post, loc: lf(pre, post, loc) - rf(pre, post, loc)
        if op == "upto":
            return lambda pre, post, loc: frozenset(
                range(lf(pre, post, loc), rf(pre, post, loc) + 1))
        if op == "maplet":
            return lambda pre, post, loc: (lf(pre, post, loc), rf(pre, post, loc))
        raise EvalError("unbound-name", f"unknown operator {op!r}", node.span)

    def _is_closed(self, node: Node) -> bool:
        from .expr import free_names
        return all(t in self.consts for t, _ in free_names(node))

    @staticmethod
    def _as_function(pairs: Value, span) -> dict:
        if not isinstance(pairs, frozenset):
            raise EvalError("partial-application",
                            "application of a non-function value", span)
        table: dict = {}
        for item in pairs:
            if not isinstance(item, tuple):
                raise EvalError("partial-application",
                                "application of a non-relation set", span)
            k, v = item
            if k in table and table[k] != v:
                table[k] = _NONFUNCTIONAL
            else:
                table.setdefault(k, v)
        return table

    def _apply(self, node: Apply, locals_: dict[str, int]) -> Callable:
        argf = self._build(node.arg, locals_)
        span = node.span
        if self._is_closed(node.fn) and not locals_:
            fnf = self._build(node.fn, locals_)
            table = self._as_function(fnf((), None, []), span)

            def fixed(pre, post, loc, _t=table, _s=span):
                k = argf(pre, post, loc)
                v = _t.get(k, _MISSING)
                if v is _MISSING or v is _NONFUNCTIONAL:
                    raise EvalError("partial-application",
                                    f"function undefined at {value_text(k)}", _s)
                return v
            return fixed
        fnf = self._build(node.fn, locals_)

        def dynamic(pre, post, loc, _s=span):
            table = self._as_function(fnf(pre, post, loc), _s)
            k = argf(pre, post, loc)
            v = table.get(k, _MISSING)
            if v is _MISSING or v is _NONFUNCTIONAL:
                raise EvalError("partial-application",
                                f"function undefined at {value_text(k)}", _s)
            return v
        return dynamic

    def _quant(self, node: Quant, locals_: dict[str, int]) -> Callable:
        inner = dict(locals_)
        base = max(locals_.values()) + 1 if locals_ else 0
        for k, n in enumerate(node.names):
            inner[n] = base + k
        bodyf = self._build(node.body, inner)
        domains = self._binder_domains(node, locals_)
        want = node.kind == "forall"

        def run(pre, post, loc):
            doms = [d(pre, post, loc) for d in domains]
            for combo in itertools.product(*doms):
                loc.extend(combo)
                try:
                    got = bodyf(pre, post, loc)
                finally:
                    del loc[len(loc) - len(combo):]
                if got != want:
                    return not want
            return want
        return run

    def _binder_domains(self, node: Quant, locals_: dict[str, int]) -> list[Callable]:
        """Per bound name: leftmost `x : E` constraint, else the INT interval."""
        if isinstance(node.body, Binary) and node.body.op == "=>":
            pool = conjuncts_of(node.body.left)
        else:
            pool = conjuncts_of(node.body)
        bound = set(node.names)
        out = []
        for n in node.names:
            source = None
            for c in pool:
                if (isinstance(c, Binary) and c.op == "in"
                        and isinstance(c.left, Name) and c.left.primes == 0
                        and c.left.text == n):
                    from .expr import free_names
                    if all(t not in bound for t, _ in free_names(c.right)):
                        source = c.right
                        break
            if source is None:
                dom = sorted(self.interp.int_domain())
                out.append(lambda pre, post, loc, _d=dom: _d)
            else:
                ef = self._build(source, locals_)

                def domain(pre, post, loc, _f=ef):
                    v = _f(pre, post, loc)
                    if not isinstance(v, frozenset):
                        raise EvalError("unbound-name",
                                        "quantifier domain is not a set")
                    return sorted(v, key=value_key)
                out.append(domain)
        return out


_MISSING = object()
_NONFUNCTIONAL = object()


# ---------------------------------------------------------------------------
# state spaces

class StateSpace:
    """Ordered enumeration of the states satisfying a scope's invariants."""

    def __init__(self, scope: ScopeContext, vars: tuple[str, ...],
                 states: list[tuple], domains: dict[str, list],
                 raw_domains: dict[str, list]):
        self.scope = scope
        self.vars = vars
        self.states = states
        self.index = {v: i for i, v in enumerate(vars)}
        self.members = set(states)
        self.domains = domains
        self.raw_domains = raw_domains

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, state: tuple) -> bool:
        return state in self.members

    def state_dict(self, state: tuple) -> dict[str, Value]:
        return dict(zip(self.vars, state))

    def tuple_of(self, binding: Mapping[str, Value]) -> tuple:
        return tuple(binding[v] for v in self.vars)


def _closed_conjunct_domains(scope: ScopeContext, interp: Interpretation,
                             compiler: Compiler, cap: int):
    """Split invariant conjuncts into per-variable domains and residual filters."""
    from .expr import free_names

    consts = interp.const_table()
    raw: dict[str, list] = {}
    for name, t in scope.types:
        raw[name] = type_domain(t, interp, cap)
    domains = dict(raw)
    residual: list[Node] = []
    once: list[Node] = []
    var_set = set(scope.all_vars)
    for _, pred in scope.conjuncts:
        for c in conjuncts_of(pred):
            names = {t for t, _ in free_names(c)}
            if not (names & var_set):
                once.append(c)
                continue
            if (isinstance(c, Binary) and c.op == "in"
                    and isinstance(c.left, Name) and c.left.primes == 0
                    and c.left.text in var_set):
                rhs_names = {t for t, _ in free_names(c.right)}
                if rhs_names <= set(consts):
                    value = compiler.compile(c.right)((), None, [])
                    if isinstance(value, frozenset):
                        keep = [v for v in domains[c.left.text] if v in value]
                        domains[c.left.text] = keep
                        continue
            residual.append(c)
    return domains, raw, residual, once


def enumerate_space(scope: ScopeContext, interp: Interpretation,
                    cap: int = 10_000_000,
                    compiler: Compiler | None = None) -> StateSpace:
    comp = compiler if compiler is not None else Compiler(scope, interp)
    domains, raw, residual, once = _closed_conjunct_domains(scope, interp, comp, cap)
    vars_ = scope.all_vars
    for c in once:
        try:
            ok = comp.compile(c)((), None, [])
        except EvalError:
            ok = False
        if not ok:
            return StateSpace(scope, vars_, [], domains, raw)
    size = 1
    for v in vars_:
        size *= len(domains[v])
    if size > cap:
        raise StateSpaceExceeded(size, cap)
    product = itertools.product(*(domains[v] for v in vars_))
    if not residual:
        states = list(product)
    else:
        filters = [comp.compile(c) for c in residual]
        states = []
        for st in product:
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
                states.append(st)
    return StateSpace(scope, vars_, states, domains, raw)


def enumerate_states(scope: ScopeContext, interp: Interpretation,
                     cap: int = 10_000_000) -> list[dict[str, Value]]:
    """Dict-per-state convenience wrapper over enumerate_space."""
    space = enumerate_space(scope, interp, cap)
    return [space.state_dict(st) for st in space.states]


def satisfaction(pred: Node, space: StateSpace, compiler: Compiler) -> frozenset:
    """[p]: the states of the space satisfying the predicate; errors read false."""
    f = compiler.compile(pred)
    out = []
    for st in space.states:
        try:
            if f(st, None, []):
                out.append(st)
        except EvalError:
            pass
    return frozenset(out)


# ---------------------------------------------------------------------------
# public dict-based evaluation and axiom checking

def _binding_env(scope_like: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(scope_like))


def eval_expression(expr: Node, binding: Mapping[str, Value],
                    interp: Interpretation,
                    after: Mapping[str, Value] | None = None) -> Value:
    """Evaluate with explicit name bindings; primed names read from `after`."""
    names = _binding_env(binding.keys())
    types = tuple((n, ("int",)) for n in names)  # types unused by evaluation
    scope = ScopeContext((ScopeLayer("globals", names),), (), types)
    comp = Compiler(scope, interp)
    pre = tuple(binding[n] for n in names)
    post = tuple(after[n] if n in after else binding[n] for n in names) \
        if after is not None else None
    return comp.compile(expr)(pre, post, [])


def eval_predicate(pred: Node, binding: Mapping[str, Value],
                   interp: Interpretation,
                   after: Mapping[str, Value] | None = None) -> bool:
    v = eval_expression(pred, binding, interp, after)
    if not isinstance(v, bool):
        raise EvalError("unbound-name", "predicate did not evaluate to a boolean")
    return v


@dataclass(frozen=True)
class AxiomViolation:
    label: str
    reason: str
    witness: tuple[tuple[str, Value], ...] = ()


_EMPTY_SCOPE = ScopeContext((ScopeLayer("globals", ()),), (), ())


def _find_witness(pred: Node, interp: Interpretation,
                  bound: dict[str, Value]) -> dict[str, Value] | None:
    """Peel universal quantifiers off a violated closed predicate.

    Returns a binding of peeled binder names under which the remainder is
    false, or None when the predicate holds.
    """
    comp = Compiler(_EMPTY_SCOPE, interp, extra_consts=bound)
    if isinstance(pred, Quant) and pred.kind == "forall":
        doms = [d((), None, []) for d in comp._binder_domains(pred, {})]
        for combo in itertools.product(*doms):
            nb = dict(bound)
            nb.update(zip(pred.names, combo))
            sub = _find_witness(pred.body, interp, nb)
            if sub is not None:
                return sub
        return None
    try:
        ok = comp.compile(pred)((), None, [])
    except EvalError:
        ok = False
    return None if ok else dict(bound)


def check_interpretation(context: Context,
                         interp: Interpretation) -> list[AxiomViolation]:
    """Empty iff every axiom evaluates true under the interpretation."""
    comp = Compiler(_EMPTY_SCOPE, interp)
    out: list[AxiomViolation] = []
    for ax in context.axioms:
        try:
            ok = comp.compile(ax.pred)((), None, [])
        except EvalError as e:
            out.append(AxiomViolation(ax.label, f"evaluation error: {e.message}"))
            continue
        if not ok:
            witness = _find_witness(ax.pred, interp, {}) or {}
            out.append(AxiomViolation(
                ax.label, "axiom is false under the CHECK interpretation",
                tuple(sorted(witness.items()))))
    return out
