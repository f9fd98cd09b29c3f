"""Lexer and recursive-descent parser for the ASCII model syntax.

Concrete syntax conventions (B-family ASCII):

    connectives   &  or  not  =>  <=>        bool(p)
    membership    :  /:  <:                  (element of / not element / subset)
    sets          \\/  /\\  \\\\  ..  |->  { } {}
    arithmetic    +  -  *  /  mod
    substitutions :=  ::  :|   combined with ||
    quantifiers   !x.(P)   #x.(P)   also !a,b.(P)
    sequencing    ;        composite assert conjuncts chained with &&&
    comments      // to end of line
    priming       v' (before-after positions only)

Sections, in order: MODEL, SETS, CONSTANTS, AXIOMS, VARIABLES, INVARIANTS,
INITIALISATION, ENVIRONMENT*, PROCESS+, MACHINE?, REFMAP*, CHECK?.

Label rule: in statement and assert-item positions, IDENT ':' always reads
as a label.  Write `ASSERT lbl: x : NAT` (or parenthesize the predicate) when
the first conjunct itself is a membership.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ParseError
from .expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit, Name,
                   Node, Quant, SetLit, Unary)
from .model import (CheckSection, Context, EnvironmentDef, Event,
                    EventBMachine, ProcessDef, RefMap, SlpModel)
from .span import Span
from .stmt import (Assert, BeginEnd, If, InvariantDef, NamedPred, Seq,
                   Statement, Stop, Sub, SubPart, While)

KEYWORDS = {
    "MODEL", "SETS", "CONSTANTS", "AXIOMS", "VARIABLES", "INVARIANTS",
    "THEOREM", "INVARIANT", "INITIALISATION", "ENVIRONMENT", "PROCESS",
    "RELY", "GUARANTEE", "BODY", "IF", "THEN", "ELSIF", "ELSE", "END",
    "WHILE", "VARIANT", "BEGIN", "VAR", "ASSERT", "STOP", "MACHINE",
    "EVENT", "WHEN", "CHECK", "BOUND", "SET", "CONST", "REFMAP",
    "REFINES", "ATOMIC", "WITH",
    "INT", "NAT", "BOOL", "TRUE", "FALSE", "or", "not", "mod", "bool",
}

OPERATORS = [
    "&&&", "|->", "<=>",
    ":=", "::", ":|", "||", "..", "/=", "<=", ">=", "=>", "<:", "/:",
    "\\/", "/\\", "\\\\", "->",
    "&", "(", ")", "{", "}", ",", ";", ":", "=", "<", ">", "+", "-",
    "*", "/", "!", "#", ".",
]

_OPS_BY_FIRST: dict[str, list[str]] = {}
for _op in OPERATORS:
    _OPS_BY_FIRST.setdefault(_op[0], []).append(_op)
for _v in _OPS_BY_FIRST.values():
    _v.sort(key=len, reverse=True)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | INT | OP | KW | EOF
    text: str
    span: Span
    primes: int = 0


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    line, col = 1, 1

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if c == "/" and text[i:i + 2] == "//":
            while i < n and text[i] != "\n":
                advance(1)
            continue
        start, sl, sc = i, line, col
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            # reject '123abc'
            if j < n and (text[j].isalpha() or text[j] == "_"):
                raise ParseError("malformed number",
                                 Span(start, j + 1, sl, sc, line, col + (j + 1 - i)))
            advance(j - i)
            toks.append(Token("INT", text[start:j], Span(start, j, sl, sc, line, col)))
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[start:j]
            advance(j - i)
            primes = 0
            while i < n and text[i] == "'":
                primes += 1
                advance(1)
            span = Span(start, i, sl, sc, line, col)
            if word in KEYWORDS:
                if primes:
                    raise ParseError(f"keyword {word!r} cannot be primed", span)
                toks.append(Token("KW", word, span))
            else:
                toks.append(Token("IDENT", word, span, primes))
            continue
        hit = None
        for op in _OPS_BY_FIRST.get(c, ()):
            if text.startswith(op, i):
                hit = op
                break
        if hit is None:
            raise ParseError(f"unexpected character {c!r}",
                             Span(start, start + 1, sl, sc, sl, sc + 1))
        advance(len(hit))
        toks.append(Token("OP", hit, Span(start, i, sl, sc, line, col)))
    toks.append(Token("EOF", "", Span(n, n, line, col, line, col)))
    return toks


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.pos = 0

    # token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.peek()
        return t.kind in ("OP", "KW") and t.text in texts

    def at_ident(self) -> bool:
        return self.peek().kind == "IDENT"

    def take(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def accept(self, *texts: str) -> Token | None:
        if self.at(*texts):
            return self.take()
        return None

    def expect(self, *texts: str) -> Token:
        if self.at(*texts):
            return self.take()
        self.fail(*texts)

    def expect_ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "IDENT":
            self.fail(what)
        if t.primes:
            raise ParseError("primed name not allowed here", t.span)
        return self.take()

    def fail(self, *expected: str) -> None:
        t = self.peek()
        got = t.text or "end of input"
        want = " or ".join(repr(e) for e in expected) or "?"
        raise ParseError(f"expected {want}, found {got!r}", t.span, expected)

    def span_from(self, start: Token) -> Span:
        prev = self.toks[max(self.pos - 1, 0)]
        return start.span.merge(prev.span)

    # shared pieces ------------------------------------------------------

    def ident_list(self) -> tuple[str, ...]:
        names = [self.expect_ident().text]
        while self.accept(","):
            names.append(self.expect_ident().text)
        return tuple(names)

    def named_pred(self, keyword_done: bool = True) -> NamedPred:
        start = self.peek()
        label = self.expect_ident("label").text
        self.expect(":")
        pred = self.predicate()
        self.accept(";")
        return NamedPred(label, pred, span=self.span_from(start))

    def invdef(self) -> InvariantDef:
        start = self.peek()
        kind = "invariant"
        if self.accept("THEOREM"):
            kind = "theorem"
        elif self.accept("INVARIANT"):
            kind = "invariant"
        label = self.expect_ident("label").text
        self.expect(":")
        pred = self.predicate()
        self.accept(";")
        return InvariantDef(kind, label, pred, span=self.span_from(start))

    # model structure ----------------------------------------------------

    def model(self) -> SlpModel:
        start = self.expect("MODEL")
        name = self.expect_ident("model name").text
        sets: tuple[str, ...] = ()
        consts: tuple[str, ...] = ()
        axioms: list[NamedPred] = []
        if self.accept("SETS"):
            sets = self.ident_list()
        if self.accept("CONSTANTS"):
            consts = self.ident_list()
        if self.accept("AXIOMS"):
            while self.at_ident():
                axioms.append(self.named_pred())
        gvars: tuple[str, ...] = ()
        if self.accept("VARIABLES"):
            gvars = self.ident_list()
        invs: list[InvariantDef] = []
        if self.accept("INVARIANTS"):
            while self.at_ident() or self.at("THEOREM"):
                invs.append(self.invdef())
        init = None
        if self.accept("INITIALISATION"):
            init = self.substitution()
        envs: list[EnvironmentDef] = []
        while self.at("ENVIRONMENT"):
            envs.append(self.environment())
        procs: list[ProcessDef] = []
        while self.at("PROCESS"):
            procs.append(self.process())
        machine = self.machine() if self.at("MACHINE") else None
        refmaps: list[RefMap] = []
        while self.at("REFMAP"):
            refmaps.append(self.refmap())
        check = self.check_section() if self.at("CHECK") else None
        if self.peek().kind != "EOF":
            self.fail("end of model")
        return SlpModel(name, Context(sets, consts, tuple(axioms)), gvars,
                        tuple(invs), init, tuple(envs), tuple(procs),
                        machine, tuple(refmaps), check,
                        span=self.span_from(start))

    def refines_clause(self) -> tuple[str, ...]:
        if self.accept("REFINES"):
            return self.ident_list()
        return ()

    def environment(self) -> EnvironmentDef:
        start = self.expect("ENVIRONMENT")
        label = self.expect_ident("environment label").text
        refines = self.refines_clause()
        relies, guars = self.rely_guarantee()
        self.expect("END")
        return EnvironmentDef(label, refines, relies, guars,
                              span=self.span_from(start))

    def rely_guarantee(self) -> tuple[tuple[NamedPred, ...], tuple[NamedPred, ...]]:
        relies: list[NamedPred] = []
        guars: list[NamedPred] = []
        while self.accept("RELY"):
            relies.append(self.named_pred())
        while self.accept("GUARANTEE"):
            guars.append(self.named_pred())
        return tuple(relies), tuple(guars)

    def process(self) -> ProcessDef:
        start = self.expect("PROCESS")
        label = self.expect_ident("process label").text
        refines = self.refines_clause()
        locals_: tuple[str, ...] = ()
        if self.accept("VAR"):
            locals_ = self.ident_list()
        relies, guars = self.rely_guarantee()
        invs: list[InvariantDef] = []
        while self.at("INVARIANT", "THEOREM"):
            invs.append(self.invdef())
        body = None
        if self.accept("BODY"):
            body = self.block()
        self.expect("END")
        return ProcessDef(label, refines, locals_, relies, guars, tuple(invs),
                          body, span=self.span_from(start))

    def machine(self) -> EventBMachine:
        start = self.expect("MACHINE")
        name = self.expect_ident("machine name").text
        mvars: tuple[str, ...] = ()
        if self.accept("VARIABLES"):
            mvars = self.ident_list()
        invs: list[NamedPred] = []
        if self.accept("INVARIANTS"):
            while self.at_ident():
                invs.append(self.named_pred())
        init = None
        if self.accept("INITIALISATION"):
            init = self.substitution()
        events: list[Event] = []
        while self.at("EVENT"):
            estart = self.take()
            elabel = self.expect_ident("event label").text
            guard = None
            if self.accept("WHEN"):
                guard = self.predicate()
            self.expect("THEN")
            action = self.substitution()
            self.expect("END")
            events.append(Event(elabel, guard, action, span=self.span_from(estart)))
        self.expect("END")
        if init is None:
            raise ParseError("machine requires INITIALISATION", start.span)
        return EventBMachine(name, mvars, tuple(invs), init, tuple(events),
                             span=self.span_from(start))

    def refmap(self) -> RefMap:
        start = self.expect("REFMAP")
        proc = self.expect_ident("process label").text
        self.expect("{")
        pairs: list[tuple[str, str]] = []
        while True:
            src = self.expect_ident("substitution label").text
            self.expect("->")
            dst = self.expect_ident("event label").text
            pairs.append((src, dst))
            if self.accept(";"):
                if self.at("}"):
                    break
                continue
            break
        self.expect("}")
        return RefMap(proc, tuple(pairs), span=self.span_from(start))

    def check_section(self) -> CheckSection:
        start = self.expect("CHECK")
        bound = None
        if self.accept("BOUND"):
            self.expect("INT")
            self.expect("=")
            lo = self.signed_int()
            self.expect("..")
            hi = self.signed_int()
            if lo > hi:
                raise ParseError("empty integer bound", self.span_from(start))
            self.expect(";")
            bound = (lo, hi)
        sets: list[tuple[str, tuple[str, ...]]] = []
        while self.accept("SET"):
            name = self.expect_ident("set name").text
            self.expect("=")
            self.expect("{")
            atoms = self.ident_list()
            self.expect("}")
            self.expect(";")
            sets.append((name, atoms))
        consts: list[tuple[str, Node]] = []
        while self.accept("CONST"):
            name = self.expect_ident("constant name").text
            self.expect("=")
            value = self.expression()
            self.expect(";")
            consts.append((name, value))
        self.expect("END")
        return CheckSection(bound, tuple(sets), tuple(consts),
                            span=self.span_from(start))

    def signed_int(self) -> int:
        neg = bool(self.accept("-"))
        t = self.peek()
        if t.kind != "INT":
            self.fail("integer")
        self.take()
        return -int(t.text) if neg else int(t.text)

    # statements ---------------------------------------------------------

    BLOCK_ENDERS = ("END", "ELSE", "ELSIF")

    def block(self) -> Statement:
        start = self.peek()
        items = [self.action()]
        while self.accept(";"):
            if self.at(*self.BLOCK_ENDERS) or self.peek().kind == "EOF":
                break
            items.append(self.action())
        if len(items) == 1:
            return items[0]
        return Seq(tuple(items), span=self.span_from(start))

    def action(self) -> Statement:
        stmt = self.statement()
        notes: list[tuple] = []
        if self.accept("ATOMIC"):
            notes.append(("atomic",))
        if self.accept("REFINES"):
            notes.append(("refines", self.ident_list()))
        if self.accept("WITH"):
            notes.append(("with", self.predicate()))
        if notes:
            # annotations are recorded but carry no semantics
            stmt = dataclasses.replace(stmt, notes=tuple(notes))
        return stmt

    def statement(self) -> Statement:
        if self.at("IF"):
            return self.if_stmt()
        if self.at("WHILE"):
            return self.while_stmt()
        if self.at("BEGIN"):
            return self.begin_stmt()
        if self.at("ASSERT"):
            return self.assert_stmt()
        if self.at("STOP"):
            t = self.take()
            return Stop(span=t.span)
        return self.substitution()

    def if_stmt(self) -> Statement:
        start = self.expect("IF")
        branches = []
        cond = self.predicate()
        self.expect("THEN")
        branches.append((cond, self.block()))
        else_body = None
        while True:
            if self.accept("ELSIF"):
                c = self.predicate()
                self.expect("THEN")
                branches.append((c, self.block()))
                continue
            if self.accept("ELSE"):
                else_body = self.block()
            break
        self.expect("END")
        return If(tuple(branches), else_body, span=self.span_from(start))

    def while_stmt(self) -> Statement:
        start = self.expect("WHILE")
        cond = self.predicate()
        invs: list[InvariantDef] = []
        while self.at("INVARIANT", "THEOREM"):
            invs.append(self.invdef())
        self.expect("VARIANT")
        variant = self.expression()
        self.expect("THEN")
        body = self.block()
        self.expect("END")
        return While(cond, tuple(invs), variant, body, span=self.span_from(start))

    def begin_stmt(self) -> Statement:
        start = self.expect("BEGIN")
        locals_: tuple[str, ...] = ()
        if self.accept("VAR"):
            locals_ = self.ident_list()
        invs: list[InvariantDef] = []
        while self.at("INVARIANT", "THEOREM"):
            invs.append(self.invdef())
        body = self.block()
        self.expect("END")
        return BeginEnd(locals_, tuple(invs), body, span=self.span_from(start))

    def assert_stmt(self) -> Statement:
        start = self.expect("ASSERT")
        items = [self.assert_item()]
        while self.accept("&&&"):
            items.append(self.assert_item())
        return Assert(tuple(items), span=self.span_from(start))

    def assert_item(self) -> tuple[str | None, Node]:
        label = None
        if self.at_ident() and self.peek().primes == 0 \
                and self.peek(1).kind == "OP" and self.peek(1).text == ":":
            label = self.take().text
            self.take()
        return (label, self.predicate())

    def substitution(self) -> Sub:
        start = self.peek()
        parts = [self.sub_part()]
        while self.accept("||"):
            parts.append(self.sub_part())
        return Sub(tuple(parts), span=self.span_from(start))

    def sub_part(self) -> SubPart:
        start = self.peek()
        label = None
        if self.at_ident() and self.peek(1).kind == "OP" and self.peek(1).text == ":":
            label = self.take().text
            self.take()
        targets = [self.expect_ident("assignment target").text]
        while self.accept(","):
            targets.append(self.expect_ident("assignment target").text)
        if self.accept(":="):
            if len(targets) != 1:
                raise ParseError("':=' takes a single target", start.span)
            return SubPart(label, "eq", tuple(targets), self.expression(),
                           span=self.span_from(start))
        if self.accept("::"):
            if len(targets) != 1:
                raise ParseError("'::' takes a single target", start.span)
            return SubPart(label, "in", tuple(targets), self.expression(),
                           span=self.span_from(start))
        if self.accept(":|"):
            return SubPart(label, "such", tuple(targets), self.predicate(),
                           span=self.span_from(start))
        self.fail(":=", "::", ":|")
        raise AssertionError  # unreachable

    # predicates and expressions ------------------------------------------

    def predicate(self) -> Node:
        return self.p_iff()

    def expression(self) -> Node:
        return self.p_iff()

    def p_iff(self) -> Node:
        left = self.p_imp()
        if self.at("<=>"):
            op = self.take()
            right = self.p_iff()
            return Binary("<=>", left, right, span=op.span)
        return left

    def p_imp(self) -> Node:
        left = self.p_or()
        if self.at("=>"):
            op = self.take()
            right = self.p_imp()
            return Binary("=>", left, right, span=op.span)
        return left

    def p_or(self) -> Node:
        left = self.p_and()
        while self.at("or"):
            op = self.take()
            left = Binary("or", left, self.p_and(), span=op.span)
        return left

    def p_and(self) -> Node:
        left = self.p_not()
        while self.at("&"):
            op = self.take()
            left = Binary("and", left, self.p_not(), span=op.span)
        return left

    def p_not(self) -> Node:
        if self.at("not"):
            op = self.take()
            return Unary("not", self.p_not(), span=op.span)
        if self.at("!", "#"):
            return self.p_quant()
        return self.p_comparison()

    def p_quant(self) -> Node:
        op = self.take()
        kind = "forall" if op.text == "!" else "exists"
        names = [self.expect_ident("bound variable").text]
        while self.accept(","):
            names.append(self.expect_ident("bound variable").text)
        self.expect(".")
        self.expect("(")
        body = self.predicate()
        self.expect(")")
        return Quant(kind, tuple(names), body, span=op.span)

    CMP_MAP = {"=": "=", "/=": "/=", "<": "<", "<=": "<=", ">": ">",
               ">=": ">=", ":": "in", "/:": "notin", "<:": "subset"}

    def p_comparison(self) -> Node:
        left = self.p_setop()
        t = self.peek()
        if t.kind == "OP" and t.text in self.CMP_MAP:
            self.take()
            right = self.p_setop()
            return Binary(self.CMP_MAP[t.text], left, right, span=t.span)
        return left

    SETOP_MAP = {"\\/": "union", "/\\": "inter", "\\\\": "diff"}

    def p_setop(self) -> Node:
        left = self.p_maplet()
        while True:
            t = self.peek()
            if t.kind == "OP" and t.text in self.SETOP_MAP:
                self.take()
                left = Binary(self.SETOP_MAP[t.text], left, self.p_maplet(), span=t.span)
            else:
                return left

    def p_maplet(self) -> Node:
        left = self.p_interval()
        while self.at("|->"):
            op = self.take()
            left = Binary("maplet", left, self.p_interval(), span=op.span)
        return left

    def p_interval(self) -> Node:
        left = self.p_add()
        if self.at(".."):
            op = self.take()
            return Binary("upto", left, self.p_add(), span=op.span)
        return left

    def p_add(self) -> Node:
        left = self.p_mul()
        while self.at("+", "-"):
            op = self.take()
            left = Binary(op.text, left, self.p_mul(), span=op.span)
        return left

    def p_mul(self) -> Node:
        left = self.p_unary()
        while self.at("*", "/", "mod"):
            op = self.take()
            kind = {"*": "*", "/": "div", "mod": "mod"}[op.text]
            left = Binary(kind, left, self.p_unary(), span=op.span)
        return left

    def p_unary(self) -> Node:
        if self.at("-"):
            op = self.take()
            return Unary("neg", self.p_unary(), span=op.span)
        return self.p_postfix()

    def p_postfix(self) -> Node:
        node = self.p_primary()
        while self.at("("):
            op = self.take()
            arg = self.expression()
            self.expect(")")
            node = Apply(node, arg, span=op.span)
        return node

    def p_primary(self) -> Node:
        t = self.peek()
        if t.kind == "INT":
            self.take()
            return IntLit(int(t.text), span=t.span)
        if t.kind == "IDENT":
            self.take()
            return Name(t.text, t.primes, span=t.span)
        if t.kind == "KW":
            if t.text in ("INT", "NAT", "BOOL"):
                self.take()
                return BaseSet(t.text, span=t.span)
            if t.text == "TRUE":
                self.take()
                return BoolLit(True, span=t.span)
            if t.text == "FALSE":
                self.take()
                return BoolLit(False, span=t.span)
            if t.text == "bool":
                self.take()
                self.expect("(")
                p = self.predicate()
                self.expect(")")
                return BoolCast(p, span=t.span)
        if self.at("("):
            self.take()
            node = self.predicate()
            self.expect(")")
            return node
        if self.at("{"):
            self.take()
            items: list[Node] = []
            if not self.at("}"):
                items.append(self.expression())
                while self.accept(","):
                    items.append(self.expression())
            self.expect("}")
            return SetLit(tuple(items), span=t.span)
        self.fail("expression")
        raise AssertionError  # unreachable


def parse_model(text: str) -> SlpModel:
    return Parser(text).model()


def parse_predicate(text: str) -> Node:
    p = Parser(text)
    node = p.predicate()
    if p.peek().kind != "EOF":
        p.fail("end of input")
    return node


def parse_expression(text: str) -> Node:
    p = Parser(text)
    node = p.expression()
    if p.peek().kind != "EOF":
        p.fail("end of input")
    return node


def parse_statement(text: str) -> Statement:
    """Parse a statement block; used by tests and the write-set command."""
    p = Parser(text)
    node = p.block()
    if p.peek().kind != "EOF":
        p.fail("end of input")
    return node
