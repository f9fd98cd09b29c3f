"""Canonical pretty-printer; parse(render(m)) is structurally equal to m."""

from __future__ import annotations

from .expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit, Name,
                   Node, Quant, SetLit, Unary)
from .model import (CheckSection, EnvironmentDef, EventBMachine, ProcessDef,
                    RefMap, SlpModel)
from .stmt import (Assert, BeginEnd, If, InvariantDef, Seq, Statement, Stop,
                   Sub, While)

_OP_TEXT = {
    "and": "&", "or": "or", "=>": "=>", "<=>": "<=>",
    "=": "=", "/=": "/=", "<": "<", "<=": "<=", ">": ">", ">=": ">=",
    "in": ":", "notin": "/:", "subset": "<:",
    "union": "\\/", "inter": "/\\", "diff": "\\\\",
    "upto": "..", "maplet": "|->",
    "+": "+", "-": "-", "*": "*", "div": "/", "mod": "mod",
}

# (level, associativity); higher level binds tighter
_OP_LEVEL = {
    "<=>": (1, "right"), "=>": (2, "right"), "or": (3, "left"),
    "and": (4, "left"),
    "=": (6, "none"), "/=": (6, "none"), "<": (6, "none"), "<=": (6, "none"),
    ">": (6, "none"), ">=": (6, "none"), "in": (6, "none"),
    "notin": (6, "none"), "subset": (6, "none"),
    "union": (7, "left"), "inter": (7, "left"), "diff": (7, "left"),
    "maplet": (8, "left"), "upto": (9, "none"),
    "+": (10, "left"), "-": (10, "left"),
    "*": (11, "left"), "div": (11, "left"), "mod": (11, "left"),
}

_ATOM = 13


def _level(node: Node) -> int:
    if isinstance(node, Binary):
        return _OP_LEVEL[node.op][0]
    if isinstance(node, Unary):
        return 5 if node.op == "not" else 12
    if isinstance(node, Quant):
        return 5
    return _ATOM


def expr_text(node: Node) -> str:
    return _render(node, 0)


def _child(node: Node, min_level: int) -> str:
    text = _render(node, min_level)
    if _level(node) < min_level:
        return f"({text})"
    return text


def _render(node: Node, _ctx: int) -> str:
    if isinstance(node, IntLit):
        return str(node.value)
    if isinstance(node, BoolLit):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, Name):
        return node.text + "'" * node.primes
    if isinstance(node, BaseSet):
        return node.name
    if isinstance(node, Unary):
        lvl = _level(node)
        op = "not " if node.op == "not" else "-"
        return op + _child(node.operand, lvl)
    if isinstance(node, Binary):
        lvl, assoc = _OP_LEVEL[node.op]
        lmin = lvl if assoc == "left" else lvl + 1
        rmin = lvl if assoc == "right" else lvl + 1
        return f"{_child(node.left, lmin)} {_OP_TEXT[node.op]} {_child(node.right, rmin)}"
    if isinstance(node, BoolCast):
        return f"bool({expr_text(node.pred)})"
    if isinstance(node, Quant):
        sym = "!" if node.kind == "forall" else "#"
        return f"{sym}{', '.join(node.names)}.({expr_text(node.body)})"
    if isinstance(node, SetLit):
        if not node.items:
            return "{}"
        return "{" + ", ".join(expr_text(i) for i in node.items) + "}"
    if isinstance(node, Apply):
        return f"{_child(node.fn, _ATOM)}({expr_text(node.arg)})"
    raise TypeError(f"cannot render {node!r}")


def _notes_text(stmt: Statement) -> str:
    out = []
    for note in stmt.notes:
        if note[0] == "atomic":
            out.append("ATOMIC")
        elif note[0] == "refines":
            out.append("REFINES " + ", ".join(note[1]))
        elif note[0] == "with":
            out.append("WITH " + expr_text(note[1]))
    return (" " + " ".join(out)) if out else ""


def sub_text(sub: Sub) -> str:
    parts = []
    for p in sub.parts:
        lbl = f"{p.label}: " if p.label else ""
        tgt = ", ".join(p.targets)
        op = {"eq": ":=", "in": "::", "such": ":|"}[p.kind]
        parts.append(f"{lbl}{tgt} {op} {expr_text(p.rhs)}")
    return " || ".join(parts)


def _invdef_lines(invs: tuple[InvariantDef, ...], indent: str) -> list[str]:
    out = []
    for inv in invs:
        kw = "THEOREM " if inv.kind == "theorem" else "INVARIANT "
        out.append(f"{indent}{kw}{inv.label}: {expr_text(inv.pred)}")
    return out


def stmt_lines(stmt: Statement, indent: str = "") -> list[str]:
    tail = _notes_text(stmt)
    if isinstance(stmt, Sub):
        return [indent + sub_text(stmt) + tail]
    if isinstance(stmt, Stop):
        return [indent + "STOP" + tail]
    if isinstance(stmt, Assert):
        items = []
        for label, pred in stmt.conjuncts:
            lbl = f"{label}: " if label else ""
            items.append(lbl + expr_text(pred))
        return [indent + "ASSERT " + " &&& ".join(items) + tail]
    if isinstance(stmt, Seq):
        out: list[str] = []
        items = stmt.items
        for i, item in enumerate(items):
            lines = stmt_lines(item, indent)
            if i + 1 < len(items):
                lines[-1] += " ;"
            out.extend(lines)
        return out
    if isinstance(stmt, If):
        out = []
        for i, (cond, body) in enumerate(stmt.branches):
            kw = "IF" if i == 0 else "ELSIF"
            out.append(f"{indent}{kw} {expr_text(cond)} THEN")
            out.extend(stmt_lines(body, indent + "  "))
        if stmt.else_body is not None:
            out.append(f"{indent}ELSE")
            out.extend(stmt_lines(stmt.else_body, indent + "  "))
        out.append(indent + "END" + tail)
        return out
    if isinstance(stmt, While):
        out = [f"{indent}WHILE {expr_text(stmt.cond)}"]
        out.extend(_invdef_lines(stmt.invariants, indent + "  "))
        out.append(f"{indent}  VARIANT {expr_text(stmt.variant)}")
        out.append(f"{indent}THEN")
        out.extend(stmt_lines(stmt.body, indent + "  "))
        out.append(indent + "END" + tail)
        return out
    if isinstance(stmt, BeginEnd):
        out = [indent + "BEGIN"]
        if stmt.locals:
            out.append(f"{indent}  VAR {', '.join(stmt.locals)}")
        out.extend(_invdef_lines(stmt.invariants, indent + "  "))
        out.extend(stmt_lines(stmt.body, indent + "  "))
        out.append(indent + "END" + tail)
        return out
    raise TypeError(f"cannot render {stmt!r}")


def _unit_header_lines(unit, indent: str) -> list[str]:
    out = []
    if unit.refines:
        out.append(f"{indent}REFINES {', '.join(unit.refines)}")
    for r in unit.relies:
        out.append(f"{indent}RELY {r.label}: {expr_text(r.pred)}")
    for g in unit.guarantees:
        out.append(f"{indent}GUARANTEE {g.label}: {expr_text(g.pred)}")
    return out


def render(model: SlpModel) -> str:
    out: list[str] = [f"MODEL {model.name}"]
    ctx = model.context
    if ctx.sets:
        out.append("SETS " + ", ".join(ctx.sets))
    if ctx.constants:
        out.append("CONSTANTS " + ", ".join(ctx.constants))
    if ctx.axioms:
        out.append("AXIOMS")
        for ax in ctx.axioms:
            out.append(f"  {ax.label}: {expr_text(ax.pred)}")
    if model.globals:
        out.append("VARIABLES " + ", ".join(model.globals))
    if model.invariants:
        out.append("INVARIANTS")
        for inv in model.invariants:
            kw = "THEOREM " if inv.kind == "theorem" else ""
            out.append(f"  {kw}{inv.label}: {expr_text(inv.pred)}")
    if model.initialisation is not None:
        out.append("INITIALISATION " + sub_text(model.initialisation))
    for env in model.environments:
        out.append(f"ENVIRONMENT {env.label}")
        out.extend(_unit_header_lines(env, "  "))
        out.append("END")
    for proc in model.processes:
        out.extend(process_lines(proc))
    if model.machine is not None:
        out.extend(machine_lines(model.machine))
    for rm in model.refmaps:
        pairs = " ; ".join(f"{a} -> {b}" for a, b in rm.pairs)
        out.append(f"REFMAP {rm.process} {{ {pairs} }}")
    if model.check is not None:
        out.extend(check_lines(model.check))
    return "\n".join(out) + "\n"


def process_lines(proc: ProcessDef) -> list[str]:
    out = [f"PROCESS {proc.label}"]
    if proc.locals:
        out.append(f"  VAR {', '.join(proc.locals)}")
    out.extend(_unit_header_lines(proc, "  "))
    out.extend(_invdef_lines(proc.invariants, "  "))
    if proc.body is not None:
        out.append("  BODY")
        out.extend(stmt_lines(proc.body, "    "))
    out.append("END")
    return out


def machine_lines(mach: EventBMachine) -> list[str]:
    out = [f"MACHINE {mach.name}"]
    if mach.variables:
        out.append("  VARIABLES " + ", ".join(mach.variables))
    if mach.invariants:
        out.append("  INVARIANTS")
        for inv in mach.invariants:
            out.append(f"    {inv.label}: {expr_text(inv.pred)}")
    out.append("  INITIALISATION " + sub_text(mach.initialisation))
    for ev in mach.events:
        guard = f" WHEN {expr_text(ev.guard)}" if ev.guard is not None else ""
        out.append(f"  EVENT {ev.label}{guard} THEN {sub_text(ev.action)} END")
    out.append("END")
    return out


def check_lines(check: CheckSection) -> list[str]:
    out = ["CHECK"]
    if check.bound is not None:
        lo, hi = check.bound
        out.append(f"  BOUND INT = {lo} .. {hi} ;")
    for name, atoms in check.sets:
        out.append(f"  SET {name} = {{ {', '.join(atoms)} }} ;")
    for name, value in check.consts:
        out.append(f"  CONST {name} = {expr_text(value)} ;")
    out.append("END")
    return out
