"""Service layer: pydantic request/response models and the handlers behind
both the HTTP API and the command line client."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from .discharge import check_all, select_pos
from .errors import ParseError, SlpError
from .kernel import build_interpretation
from .obligations import generate
from .parser import parse_model
from .printer import expr_text, render, stmt_lines, sub_text
from .semantics import write_set
from .session import Options, Session
from .smt import export_solver
from .stmt import BeginEnd, If, Statement, Sub, While, seq_items
from .traces import check_divergence, check_inclusion
from .typecheck import infer_types
from .validate import validate_model

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_INPUT_ERROR = 2
EXIT_RESOURCE = 3


class DiagnosticOut(BaseModel):
    rule: str
    message: str
    line: Optional[int] = None
    col: Optional[int] = None
    severity: str = "error"


class ParseRequest(BaseModel):
    text: str


class ParseResponse(BaseModel):
    ok: bool
    model: Optional[str] = None
    diagnostics: list[DiagnosticOut] = Field(default_factory=list)
    rendered: Optional[str] = None
    exit_code: int = EXIT_OK


class CheckOptions(BaseModel):
    po: Optional[str] = None
    strict_paper: bool = False
    strict_feasibility: bool = False
    ref_mode: str = "inter"
    workers: int = 1


class CheckRequest(BaseModel):
    text: str
    options: CheckOptions = Field(default_factory=CheckOptions)


class PoResultOut(BaseModel):
    id: str
    family: str
    verdict: str
    witness: Optional[dict[str, str]] = None
    ms: int = 0
    reason: Optional[str] = None


class ReportOut(BaseModel):
    model: str
    pos: list[PoResultOut]
    summary: dict[str, int]


class CheckResponse(BaseModel):
    ok: bool
    errors: list[str] = Field(default_factory=list)
    report: Optional[ReportOut] = None
    exit_code: int = EXIT_OK


class PosRequest(BaseModel):
    text: str
    po: Optional[str] = None
    strict_paper: bool = False
    strict_feasibility: bool = False
    ref_mode: str = "inter"


class SequentOut(BaseModel):
    id: str
    family: str
    hypotheses: list[str]
    goal: Optional[str]
    relational_form: str


class PosResponse(BaseModel):
    ok: bool
    errors: list[str] = Field(default_factory=list)
    pos: list[SequentOut] = Field(default_factory=list)
    exit_code: int = EXIT_OK


class SmtRequest(BaseModel):
    text: str
    po: Optional[str] = None
    strict_feasibility: bool = False
    ref_mode: str = "inter"


class SmtResponse(BaseModel):
    ok: bool
    errors: list[str] = Field(default_factory=list)
    scripts: dict[str, str] = Field(default_factory=dict)
    unsupported: dict[str, str] = Field(default_factory=dict)
    exit_code: int = EXIT_OK


class TraceRequest(BaseModel):
    text: str
    process: Optional[str] = None
    depth: int = 16
    ref_mode: str = "inter"


class TraceResultOut(BaseModel):
    process: str
    inclusion_ok: bool
    counterexample: Optional[list[str]] = None
    inclusion_reason: str = ""
    divergence_ok: bool
    divergence_reason: str = ""


class TraceResponse(BaseModel):
    ok: bool
    errors: list[str] = Field(default_factory=list)
    results: list[TraceResultOut] = Field(default_factory=list)
    exit_code: int = EXIT_OK


class RwEntryOut(BaseModel):
    statement: str
    writes: list[str]
    depth: int


class RwProcessOut(BaseModel):
    process: str
    entries: list[RwEntryOut]


class RwRequest(BaseModel):
    text: str


class RwResponse(BaseModel):
    ok: bool
    errors: list[str] = Field(default_factory=list)
    processes: list[RwProcessOut] = Field(default_factory=list)
    exit_code: int = EXIT_OK


# --- helpers -------------------------------------------------------------------

def _load(text: str):
    """Parse and validate; returns (model, info, errors)."""
    try:
        model = parse_model(text)
    except ParseError as e:
        return None, None, [str(e)]
    info = infer_types(model)
    diags = validate_model(model, info)
    errors = [str(d) for d in diags if d.severity == "error"]
    return model, info, errors


def _session(model, info, opts: CheckOptions | None = None) -> Session:
    options = Options(
        strict_paper=bool(opts and opts.strict_paper),
        strict_feasibility=bool(opts and opts.strict_feasibility),
        ref_mode=(opts.ref_mode if opts else "inter"),
        workers=(opts.workers if opts else 1),
    )
    return Session(model, options, info=info)


def run_parse(req: ParseRequest) -> ParseResponse:
    try:
        model = parse_model(req.text)
    except ParseError as e:
        d = DiagnosticOut(rule=e.code, message=e.message,
                          line=e.span.line if e.span else None,
                          col=e.span.col if e.span else None)
        return ParseResponse(ok=False, diagnostics=[d],
                             exit_code=EXIT_INPUT_ERROR)
    diags = [DiagnosticOut(rule=d.rule, message=d.message,
                           line=d.span.line if d.span else None,
                           col=d.span.col if d.span else None,
                           severity=d.severity)
             for d in validate_model(model)]
    ok = not any(d.severity == "error" for d in diags)
    return ParseResponse(ok=ok, model=model.name, diagnostics=diags,
                         rendered=render(model) if ok else None,
                         exit_code=EXIT_OK if ok else EXIT_INPUT_ERROR)


def run_check(req: CheckRequest) -> CheckResponse:
    model, info, errors = _load(req.text)
    if model is None or errors:
        return CheckResponse(ok=False, errors=errors,
                             exit_code=EXIT_INPUT_ERROR)
    try:
        session = _session(model, info, req.options)
    except SlpError as e:
        return CheckResponse(ok=False, errors=[str(e)],
                             exit_code=EXIT_INPUT_ERROR)
    report = check_all(session, req.options.po)
    pos = [PoResultOut(id=r.po_id, family=r.family, verdict=r.verdict,
                       witness=r.witness, ms=0, reason=r.reason)
           for r in report.results]
    summary = report.summary
    if summary["violated"]:
        code = EXIT_VIOLATED
    elif summary["skipped"]:
        code = EXIT_RESOURCE
    else:
        code = EXIT_OK
    out = ReportOut(model=report.model, pos=pos,
                    summary={"discharged": summary["discharged"],
                             "violated": summary["violated"],
                             "skipped": summary["skipped"]})
    return CheckResponse(ok=True, report=out, exit_code=code)


def report_json_text(report: ReportOut) -> str:
    """The canonical on-disk JSON form (exact key order, deterministic)."""
    import json
    doc = {
        "model": report.model,
        "pos": [{
            "id": p.id,
            "family": p.family,
            "verdict": p.verdict,
            "witness": p.witness if p.witness else None,
            "ms": 0,
        } for p in report.pos],
        "summary": {
            "discharged": report.summary.get("discharged", 0),
            "violated": report.summary.get("violated", 0),
            "skipped": report.summary.get("skipped", 0),
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def run_pos(req: PosRequest) -> PosResponse:
    model, info, errors = _load(req.text)
    if model is None or errors:
        return PosResponse(ok=False, errors=errors, exit_code=EXIT_INPUT_ERROR)
    try:
        session = _session(model, info, CheckOptions(
            strict_paper=req.strict_paper,
            strict_feasibility=req.strict_feasibility,
            ref_mode=req.ref_mode))
        pos = select_pos(generate(session), req.po)
    except SlpError as e:
        return PosResponse(ok=False, errors=[str(e)], exit_code=EXIT_INPUT_ERROR)
    pos.sort(key=lambda p: p.id)
    out = []
    for po in pos:
        hyps = [f"{label}: {expr_text(p)}" for label, p in po.hypotheses]
        out.append(SequentOut(id=po.id, family=po.family, hypotheses=hyps,
                              goal=expr_text(po.goal) if po.goal is not None
                              else None,
                              relational_form=po.relational_form))
    return PosResponse(ok=True, pos=out)


def run_smt(req: SmtRequest) -> SmtResponse:
    model, info, errors = _load(req.text)
    if model is None or errors:
        return SmtResponse(ok=False, errors=errors, exit_code=EXIT_INPUT_ERROR)
    try:
        session = _session(model, info, CheckOptions(
            strict_feasibility=req.strict_feasibility, ref_mode=req.ref_mode))
        pos = select_pos(generate(session), req.po)
    except SlpError as e:
        return SmtResponse(ok=False, errors=[str(e)], exit_code=EXIT_INPUT_ERROR)
    pos.sort(key=lambda p: p.id)
    scripts: dict[str, str] = {}
    unsupported: dict[str, str] = {}
    for po in pos:
        try:
            scripts[po.id] = export_solver(po, session)
        except SlpError as e:
            unsupported[po.id] = e.message
    return SmtResponse(ok=True, scripts=scripts, unsupported=unsupported)


def run_trace(req: TraceRequest) -> TraceResponse:
    model, info, errors = _load(req.text)
    if model is None or errors:
        return TraceResponse(ok=False, errors=errors, exit_code=EXIT_INPUT_ERROR)
    if model.machine is None:
        return TraceResponse(ok=False, errors=["trace checking requires a MACHINE"],
                             exit_code=EXIT_INPUT_ERROR)
    session = _session(model, info, CheckOptions(ref_mode=req.ref_mode))
    targets = []
    for rm in model.refmaps:
        if req.process is None or rm.process == req.process:
            targets.append(rm)
    if not targets:
        return TraceResponse(ok=False,
                             errors=["no REFMAP found for the requested process"],
                             exit_code=EXIT_INPUT_ERROR)
    results = []
    any_violated = False
    any_skipped = False
    for rm in targets:
        proc = model.process(rm.process)
        amap = rm.as_dict()
        events = frozenset(amap.values())
        try:
            inc = check_inclusion(session, proc, model.machine, events, amap,
                                  req.depth)
            div = check_divergence(session, proc)
        except SlpError as e:
            any_skipped = True
            results.append(TraceResultOut(
                process=rm.process, inclusion_ok=False,
                inclusion_reason=f"skipped: {e}", divergence_ok=False,
                divergence_reason=f"skipped: {e}"))
            continue
        if not inc.ok or not div.ok:
            any_violated = True
        results.append(TraceResultOut(
            process=rm.process,
            inclusion_ok=inc.ok,
            counterexample=list(inc.counterexample)
            if inc.counterexample is not None else None,
            inclusion_reason=inc.reason,
            divergence_ok=div.ok,
            divergence_reason=div.reason))
    if any_violated:
        code = EXIT_VIOLATED
    elif any_skipped:
        code = EXIT_RESOURCE
    else:
        code = EXIT_OK
    return TraceResponse(ok=True, results=results, exit_code=code)


def _stmt_brief(stmt: Statement) -> str:
    if isinstance(stmt, Sub):
        return sub_text(stmt)
    if isinstance(stmt, If):
        return f"IF {expr_text(stmt.branches[0][0])} ..."
    if isinstance(stmt, While):
        return f"WHILE {expr_text(stmt.cond)} ..."
    if isinstance(stmt, BeginEnd):
        return "BEGIN ..."
    return stmt_lines(stmt)[0].strip()


def run_rw(req: RwRequest) -> RwResponse:
    model, info, errors = _load(req.text)
    if model is None or errors:
        return RwResponse(ok=False, errors=errors, exit_code=EXIT_INPUT_ERROR)
    out = []
    for proc in model.processes:
        entries: list[RwEntryOut] = []
        if proc.body is not None:
            visible = frozenset(model.globals) | frozenset(proc.locals)

            def walk(stmt: Statement, vis: frozenset, depth: int) -> None:
                for item in seq_items(stmt):
                    ws = write_set(item, vis)
                    entries.append(RwEntryOut(statement=_stmt_brief(item),
                                              writes=sorted(ws), depth=depth))
                    if isinstance(item, If):
                        for _, body in item.branches:
                            walk(body, vis, depth + 1)
                        if item.else_body is not None:
                            walk(item.else_body, vis, depth + 1)
                    elif isinstance(item, While):
                        walk(item.body, vis, depth + 1)
                    elif isinstance(item, BeginEnd):
                        walk(item.body, vis | frozenset(item.locals), depth + 1)

            walk(proc.body, visible, 0)
        out.append(RwProcessOut(process=proc.label, entries=entries))
    return RwResponse(ok=True, processes=out)
