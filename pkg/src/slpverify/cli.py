"""Command line front end; a thin client over the service layer.

By default requests are handled in-process; `--server URL` sends the same
request payloads to a running slpverify HTTP service instead.
"""

from __future__ import annotations

import argparse
import pathlib
import sys

from . import service as svc

_ENDPOINTS = {
    "/v1/parse": (svc.ParseRequest, svc.run_parse, svc.ParseResponse),
    "/v1/check": (svc.CheckRequest, svc.run_check, svc.CheckResponse),
    "/v1/pos": (svc.PosRequest, svc.run_pos, svc.PosResponse),
    "/v1/smt": (svc.SmtRequest, svc.run_smt, svc.SmtResponse),
    "/v1/trace": (svc.TraceRequest, svc.run_trace, svc.TraceResponse),
    "/v1/rw": (svc.RwRequest, svc.run_rw, svc.RwResponse),
}


def call(server: str | None, endpoint: str, payload: dict):
    req_model, handler, resp_model = _ENDPOINTS[endpoint]
    if server:
        import httpx
        url = server.rstrip("/") + endpoint
        resp = httpx.post(url, json=payload, timeout=None)
        resp.raise_for_status()
        return resp_model.model_validate(resp.json())
    return handler(req_model.model_validate(payload))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slp",
        description="Consistency and refinement checking for SLP models "
                    "by exhaustive finite-domain enumeration.")
    ap.add_argument("--server", metavar="URL", default=None,
                    help="send requests to a running slpverify service")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, workers=False, outputs=False, modes=True):
        p.add_argument("file", help="input .slp model file")
        p.add_argument("--po", metavar="PATTERN", default=None,
                       help="glob over PO ids")
        if modes:
            p.add_argument("--strict-paper", action="store_true")
            p.add_argument("--strict-feasibility", action="store_true")
            p.add_argument("--ref-mode", choices=("inter", "union"),
                           default="inter")
        if workers:
            p.add_argument("--workers", type=int, default=1)
        if outputs:
            p.add_argument("--json", metavar="PATH", default=None)
            p.add_argument("--smt", metavar="DIR", default=None)

    p = sub.add_parser("check", help="generate and discharge every proof obligation")
    common(p, workers=True, outputs=True)
    p.add_argument("--depth", type=int, default=16, help="unused by check")

    p = sub.add_parser("pos", help="list proof obligations without checking")
    common(p)

    p = sub.add_parser("export-smt", help="write one SMT-LIB script per PO")
    common(p)
    p.add_argument("--smt", metavar="DIR", required=True)
    p.add_argument("--solver", metavar="CMD", default=None,
                   help="optionally run each script through a solver command")

    p = sub.add_parser("trace", help="bounded trace inclusion and divergence")
    p.add_argument("file")
    p.add_argument("--process", default=None)
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--ref-mode", choices=("inter", "union"), default="inter")
    p.add_argument("--json", metavar="PATH", default=None)

    p = sub.add_parser("rw", help="print write sets per statement")
    p.add_argument("file")

    p = sub.add_parser("parse", help="parse and validate only")
    p.add_argument("file")
    return ap


def _read(path: str) -> str:
    return pathlib.Path(path).read_text(encoding="utf-8")


def cmd_check(args, server) -> int:
    payload = {"text": _read(args.file), "options": {
        "po": args.po,
        "strict_paper": args.strict_paper,
        "strict_feasibility": args.strict_feasibility,
        "ref_mode": args.ref_mode,
        "workers": args.workers,
    }}
    resp = call(server, "/v1/check", payload)
    if not resp.ok or resp.report is None:
        for e in resp.errors:
            print(f"error: {e}", file=sys.stderr)
        return resp.exit_code
    report = resp.report
    for po in report.pos:
        line = f"{po.verdict.upper():10s} {po.id} [{po.family}]"
        if po.verdict != "discharged" and po.reason:
            line += f"  -- {po.reason}"
        print(line)
        if po.verdict == "violated" and po.witness:
            binding = ", ".join(f"{k} = {v}" for k, v in po.witness.items())
            print(f"           witness: {binding}")
    s = report.summary
    print(f"discharged: {s.get('discharged', 0)}  violated: "
          f"{s.get('violated', 0)}  skipped: {s.get('skipped', 0)}")
    if args.json:
        pathlib.Path(args.json).write_text(svc.report_json_text(report),
                                           encoding="utf-8")
    if args.smt:
        _write_smt(args, server, args.smt)
    return resp.exit_code


def _write_smt(args, server, directory: str) -> dict:
    payload = {"text": _read(args.file), "po": getattr(args, "po", None),
               "strict_feasibility": getattr(args, "strict_feasibility", False),
               "ref_mode": getattr(args, "ref_mode", "inter")}
    resp = call(server, "/v1/smt", payload)
    outdir = pathlib.Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    for po_id, text in resp.scripts.items():
        (outdir / f"{po_id}.smt2").write_text(text, encoding="utf-8")
    for po_id, why in resp.unsupported.items():
        print(f"note: {po_id}: not exported ({why})", file=sys.stderr)
    return resp.scripts


def cmd_pos(args, server) -> int:
    payload = {"text": _read(args.file), "po": args.po,
               "strict_paper": args.strict_paper,
               "strict_feasibility": args.strict_feasibility,
               "ref_mode": args.ref_mode}
    resp = call(server, "/v1/pos", payload)
    if not resp.ok:
        for e in resp.errors:
            print(f"error: {e}", file=sys.stderr)
        return resp.exit_code
    for po in resp.pos:
        print(f"{po.id} [{po.family}]")
        for h in po.hypotheses:
            print(f"    {h}")
        goal = po.goal if po.goal is not None else f"<{po.relational_form}>"
        print(f"    |- {goal}")
    print(f"{len(resp.pos)} proof obligations")
    return 0


def cmd_export_smt(args, server) -> int:
    scripts = _write_smt(args, server, args.smt)
    print(f"exported {len(scripts)} scripts to {args.smt}")
    if args.solver:
        return _run_solver(args, scripts)
    return 0


def _run_solver(args, scripts: dict) -> int:
    import subprocess
    worst = 0
    for po_id in sorted(scripts):
        path = pathlib.Path(args.smt) / f"{po_id}.smt2"
        out = subprocess.run(args.solver.split() + [str(path)],
                             capture_output=True, text=True)
        verdict = out.stdout.strip().splitlines()[-1] if out.stdout else "?"
        print(f"{po_id}: {verdict}")
        if verdict not in ("sat", "unsat"):
            worst = max(worst, 3)
    return worst


def cmd_trace(args, server) -> int:
    payload = {"text": _read(args.file), "process": args.process,
               "depth": args.depth, "ref_mode": args.ref_mode}
    resp = call(server, "/v1/trace", payload)
    if not resp.ok:
        for e in resp.errors:
            print(f"error: {e}", file=sys.stderr)
        return resp.exit_code
    for r in resp.results:
        inc = "Discharged" if r.inclusion_ok else "Violated"
        print(f"{r.process}: trace inclusion {inc}")
        if r.counterexample is not None:
            print(f"    shortest offending trace: <{', '.join(r.counterexample)}>")
        if r.inclusion_reason and not r.inclusion_ok:
            print(f"    {r.inclusion_reason}")
        div = "Discharged" if r.divergence_ok else "Violated"
        print(f"{r.process}: divergence freedom {div}")
        if r.divergence_reason and not r.divergence_ok:
            print(f"    {r.divergence_reason}")
    if args.json:
        import json
        doc = {"results": [r.model_dump() for r in resp.results]}
        pathlib.Path(args.json).write_text(json.dumps(doc, indent=2) + "\n",
                                           encoding="utf-8")
    return resp.exit_code


def cmd_rw(args, server) -> int:
    resp = call(server, "/v1/rw", {"text": _read(args.file)})
    if not resp.ok:
        for e in resp.errors:
            print(f"error: {e}", file=sys.stderr)
        return resp.exit_code
    for proc in resp.processes:
        print(f"PROCESS {proc.process}")
        for entry in proc.entries:
            pad = "  " * (entry.depth + 1)
            ws = "{" + ", ".join(entry.writes) + "}"
            print(f"{pad}{ws:24s} {entry.statement}")
    return 0


def cmd_parse(args, server) -> int:
    resp = call(server, "/v1/parse", {"text": _read(args.file)})
    for d in resp.diagnostics:
        loc = f"{d.line}:{d.col} " if d.line else ""
        print(f"{loc}{d.severity} [{d.rule}] {d.message}", file=sys.stderr)
    if resp.ok and resp.rendered:
        print(resp.rendered, end="")
    return resp.exit_code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    server = args.server
    try:
        if args.command == "check":
            return cmd_check(args, server)
        if args.command == "pos":
            return cmd_pos(args, server)
        if args.command == "export-smt":
            return cmd_export_smt(args, server)
        if args.command == "trace":
            return cmd_trace(args, server)
        if args.command == "rw":
            return cmd_rw(args, server)
        if args.command == "parse":
            return cmd_parse(args, server)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return svc.EXIT_INPUT_ERROR
    return svc.EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
