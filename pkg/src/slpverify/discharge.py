"""Decide proof obligations by exhaustive finite-domain checking."""

from __future__ import annotations

import fnmatch
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .errors import EvalError, SlpError
from .expr import TRUE
from .kernel import check_interpretation, type_domain, value_text
from .obligations import ProofObligation, generate
from .semantics import CHECKMARK, Interpreter
from .session import Session

DISCHARGED = "discharged"
VIOLATED = "violated"
SKIPPED = "skipped"


@dataclass(frozen=True)
class CheckResult:
    po_id: str
    family: str
    verdict: str
    witness: Optional[dict[str, str]] = None
    reason: Optional[str] = None
    elapsed_ms: float = 0.0


def _w(scope, state, primes: int = 0) -> dict[str, str]:
    mark = "'" * primes
    return {f"{v}{mark}": value_text(x) for v, x in zip(scope.all_vars, state)}


def _raw_product(space, cap: int):
    size = 1
    for v in space.vars:
        size *= len(space.raw_domains[v])
    return size, itertools.product(*(space.raw_domains[v] for v in space.vars))


class Checker:
    def __init__(self, session: Session):
        self.session = session
        self.interp = Interpreter(session)

    def check(self, po: ProofObligation) -> CheckResult:
        start = time.perf_counter()
        try:
            verdict, witness, reason = self._dispatch(po)
        except SlpError as e:
            verdict, witness, reason = SKIPPED, None, str(e)
        ms = (time.perf_counter() - start) * 1000.0
        return CheckResult(po.id, po.family, verdict, witness, reason, ms)

    def _dispatch(self, po: ProofObligation):
        form = po.form
        kind = form.kind
        if kind == "axm":
            return self._check_axm()
        if kind == "thm":
            return self._check_thm(po)
        if kind == "wd":
            return self._check_wd(po)
        if kind == "inv":
            return self._check_inv(po)
        if kind == "grt":
            return self._check_grt(po)
        if kind == "asn":
            return self._check_asn(po)
        if kind == "var":
            return self._check_var(po)
        if kind == "fis":
            return self._check_fis(po)
        if kind == "clo_refl":
            return self._check_clo_refl(po)
        if kind == "clo_trans":
            return self._check_clo_trans(po)
        if kind == "cmp":
            return self._check_cmp(po)
        if kind == "ref":
            return self._check_ref(po)
        return SKIPPED, None, f"unknown check form {kind!r}"

    # families ------------------------------------------------------------

    def _check_axm(self):
        violations = check_interpretation(self.session.model.context,
                                          self.session.interp)
        if not violations:
            return DISCHARGED, None, None
        v = violations[0]
        witness = {name: value_text(val) for name, val in v.witness}
        return VIOLATED, witness, f"axiom {v.label}: {v.reason}"

    def _check_thm(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        space = self.session.space(scope)
        comp = self.session.compiler(scope)
        goal = comp.compile(form.goal)
        priors = [comp.compile(p) for _, p in form.prior_theorems]
        for st in space.states:
            try:
                if not all(p(st, None, []) for p in priors):
                    continue
                if not goal(st, None, []):
                    return VIOLATED, _w(scope, st), "theorem false at this state"
            except EvalError as e:
                return VIOLATED, _w(scope, st), f"evaluation error: {e.message}"
        return DISCHARGED, None, None

    def _ctx_states(self, form):
        scope = form.scope
        space = self.session.space(scope)
        if form.context == TRUE:
            return space.members
        return self.session.sat(scope, form.context)

    def _check_wd(self, po: ProofObligation):
        form = po.form
        rel = self.interp.relation(form.stmt, form.scope)
        ctx = self._ctx_states(form)
        if self.session.options.strict_feasibility:
            dom = rel.dom()
            space = self.session.space(form.scope)
            for st in space.states:
                if st in ctx and st not in dom:
                    return (VIOLATED, _w(form.scope, st),
                            "statement not applicable at this context state")
            return DISCHARGED, None, None
        for p, _ in rel.pairs:
            if p in ctx:
                return DISCHARGED, None, None
        return (VIOLATED, {},
                "the restricted relation is empty: no context state can take the step")

    def _check_inv(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        rel = self.interp.relation(form.stmt, scope)
        ctx = self._ctx_states(form)
        space = self.session.space(scope)
        comp = self.session.compiler(scope)
        for p, q in rel.pairs:
            if q is CHECKMARK or p not in ctx:
                continue
            if q not in space.members:
                reason = "after state violates the invariant"
                for label, pred in scope.conjuncts:
                    f = comp.compile(pred)
                    try:
                        ok = f(q, None, [])
                    except EvalError:
                        ok = False
                    if not ok:
                        reason = f"after state violates invariant {label}"
                        break
                witness = _w(scope, p)
                witness.update(_w(scope, q, 1))
                return VIOLATED, witness, reason
        return DISCHARGED, None, None

    def _check_grt(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        rel = self.interp.relation(form.stmt, scope)
        ctx = self._ctx_states(form)
        gf = self.session.compiler(scope).compile(form.guarantee)
        for p, q in rel.pairs:
            if q is CHECKMARK or p not in ctx:
                continue
            try:
                ok = gf(p, q, [])
            except EvalError:
                ok = False
            if not ok:
                witness = _w(scope, p)
                witness.update(_w(scope, q, 1))
                return VIOLATED, witness, "step not covered by the guarantee"
        return DISCHARGED, None, None

    def _rely_successors(self, scope, rely, sources: list) -> list[tuple]:
        """(source, successor) pairs of the rely over the scope's state space."""
        space = self.session.space(scope)
        rf = self.session.compiler(scope).compile(rely)
        out = []
        for s in sources:
            for t in space.states:
                try:
                    if rf(s, t, []):
                        out.append((s, t))
                except EvalError:
                    continue
        return out

    def _check_asn(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        space = self.session.space(scope)
        goal_states = self.session.sat(scope, form.goal)
        if form.prev_stmt is not None:
            rel = self.interp.relation(form.prev_stmt, scope)
            seen = set()
            image = []
            for p, q in rel.pairs:
                if q is not CHECKMARK and q not in seen:
                    seen.add(q)
                    image.append((p, q))
        elif form.pre_assert is not None:
            if form.prev_loop is not None:
                states = self.interp.exit_states(form.prev_loop, scope)
                ordered = [s for s in space.states if s in states]
            else:
                sat = self.session.sat(scope, form.pre_assert)
                ordered = [s for s in space.states if s in sat]
            image = [(s, s) for s in ordered]
        else:
            image = [(s, s) for s in space.states]
        if form.rely is None:
            for src, t in image:
                if t not in goal_states:
                    witness = _w(scope, src)
                    witness.update(_w(scope, t, 1))
                    return (VIOLATED, witness,
                            "assertion not established from this state")
            return DISCHARGED, None, None
        blurred = self._rely_successors(scope, form.rely,
                                        [t for _, t in image])
        for mid, t in blurred:
            if t not in goal_states:
                witness = _w(scope, mid)
                witness.update(_w(scope, t, 1))
                return (VIOLATED, witness,
                        "assertion not established after rely interference")
        return DISCHARGED, None, None

    def _check_var(self, po: ProofObligation):
        form = po.form
        trm = self.interp.trm_holds(form.loop, form.scope)
        if trm.ok:
            return DISCHARGED, None, None
        witness: dict[str, str] = {}
        if trm.witness_pre:
            witness.update({k: value_text(v) for k, v in trm.witness_pre.items()})
        if trm.witness_post:
            witness.update({f"{k}'": value_text(v)
                            for k, v in trm.witness_post.items()})
        return VIOLATED, witness, trm.reason

    def _check_fis(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        space = self.session.space(scope)
        size, raw = _raw_product(space, self.session.options.state_cap)
        if len(space) * size > self.session.options.state_cap:
            raise SlpError("state-space-exceeded",
                           f"rely pair space {len(space) * size} exceeds the cap")
        rf = self.session.compiler(scope).compile(form.rely)
        raw_states = list(raw)
        for s in space.states:
            for t in raw_states:
                try:
                    if not rf(s, t, []):
                        continue
                except EvalError:
                    continue
                if t not in space.members:
                    witness = _w(scope, s)
                    witness.update(_w(scope, t, 1))
                    return (VIOLATED, witness,
                            "rely step leaves the invariant states")
        return DISCHARGED, None, None

    def _check_clo_refl(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        space = self.session.space(scope)
        rf = self.session.compiler(scope).compile(form.rely)
        for s in space.states:
            try:
                ok = rf(s, s, [])
            except EvalError:
                ok = False
            if not ok:
                return VIOLATED, _w(scope, s), "rely is not reflexive at this state"
        return DISCHARGED, None, None

    def _check_clo_trans(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        space = self.session.space(scope)
        rf = self.session.compiler(scope).compile(form.rely)
        succ: dict[tuple, list] = {}
        succ_set: dict[tuple, set] = {}
        for s in space.states:
            row = []
            for t in space.states:
                try:
                    if rf(s, t, []):
                        row.append(t)
                except EvalError:
                    continue
            succ[s] = row
            succ_set[s] = set(row)
        for s in space.states:
            for t in succ[s]:
                for u in succ.get(t, ()):
                    if u not in succ_set[s]:
                        witness = _w(scope, s)
                        witness.update(_w(scope, t, 1))
                        witness.update(_w(scope, u, 2))
                        return (VIOLATED, witness,
                                "two rely steps escape the rely relation")
        return DISCHARGED, None, None

    def _check_cmp(self, po: ProofObligation):
        form = po.form
        if form.rely is None:
            return DISCHARGED, None, None  # absent rely tolerates anything
        scope = form.scope
        space = self.session.space(scope)
        size, raw = _raw_product(space, self.session.options.state_cap)
        if len(space) * size > self.session.options.state_cap:
            raise SlpError("state-space-exceeded",
                           f"compatibility pair space {len(space) * size} too large")
        comp = self.session.compiler(scope)
        gf = comp.compile(form.guarantee) if form.guarantee is not None else None
        rf = comp.compile(form.rely)
        raw_states = list(raw)
        for s in space.states:
            for t in raw_states:
                if gf is not None:
                    try:
                        if not gf(s, t, []):
                            continue
                    except EvalError:
                        continue
                try:
                    ok = rf(s, t, [])
                except EvalError:
                    ok = False
                if not ok:
                    witness = _w(scope, s)
                    witness.update(_w(scope, t, 1))
                    return (VIOLATED, witness,
                            "guaranteed step not tolerated by the rely")
        return DISCHARGED, None, None

    def _check_ref(self, po: ProofObligation):
        form = po.form
        scope = form.scope
        space = self.session.space(scope)
        size, raw = _raw_product(space, self.session.options.state_cap)
        if len(space) * size > self.session.options.state_cap:
            raise SlpError("state-space-exceeded",
                           f"refinement pair space {len(space) * size} too large")
        comp = self.session.compiler(scope)
        gf = comp.compile(form.guarantee)
        event_sets = []
        for ev in form.events:
            rel = self.interp.event_relation(ev, scope)
            event_sets.append(rel.pair_set())
        inter_mode = self.session.options.ref_mode == "inter"
        raw_states = list(raw)
        for s in space.states:
            for t in raw_states:
                try:
                    if not gf(s, t, []):
                        continue
                except EvalError:
                    continue
                pair = (s, t)
                if inter_mode:
                    ok = all(pair in es for es in event_sets)
                else:
                    ok = any(pair in es for es in event_sets)
                if not ok:
                    witness = _w(scope, s)
                    witness.update(_w(scope, t, 1))
                    return (VIOLATED, witness,
                            "guaranteed step not covered by the refined events")
        return DISCHARGED, None, None


def check(po: ProofObligation, session: Session) -> CheckResult:
    return Checker(session).check(po)


@dataclass
class Report:
    model: str
    results: list[CheckResult]

    @property
    def summary(self) -> dict[str, int]:
        out = {DISCHARGED: 0, VIOLATED: 0, SKIPPED: 0}
        for r in self.results:
            out[r.verdict] += 1
        return out

    def to_json_dict(self) -> dict:
        pos = []
        for r in self.results:
            pos.append({
                "id": r.po_id,
                "family": r.family,
                "verdict": r.verdict,
                "witness": r.witness if r.witness else None,
                "ms": 0,
            })
        return {
            "model": self.model,
            "pos": pos,
            "summary": {
                "discharged": self.summary[DISCHARGED],
                "violated": self.summary[VIOLATED],
                "skipped": self.summary[SKIPPED],
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def select_pos(pos: list[ProofObligation],
               pattern: Optional[str]) -> list[ProofObligation]:
    if not pattern:
        return list(pos)
    return [p for p in pos if fnmatch.fnmatchcase(p.id, pattern)]


def check_all(session: Session, pattern: Optional[str] = None,
              pos: Optional[list[ProofObligation]] = None) -> Report:
    """Generate and check matching POs; report is sorted by PO id."""
    todo = select_pos(pos if pos is not None else generate(session), pattern)
    todo.sort(key=lambda p: p.id)
    checker = Checker(session)
    workers = max(1, session.options.workers)
    if workers == 1 or len(todo) <= 1:
        results = [checker.check(p) for p in todo]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(checker.check, todo))
    results.sort(key=lambda r: r.po_id)
    return Report(session.model.name, results)
