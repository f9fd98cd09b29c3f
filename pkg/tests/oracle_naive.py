"""Deliberately simple second evaluator and PO re-checker.

Everything here is written the dumb way on purpose: dict environments, no
compilation, no caching, no domain extraction (raw type-domain products
filtered by predicates).  It must agree with the kernel on every corpus PO.
"""

from __future__ import annotations

import itertools
from fractions import Fraction  # noqa: F401  (unused; keeps stdlib-only deps obvious)

from slpverify.expr import (Apply, BaseSet, Binary, BoolCast, BoolLit, IntLit,
                            Name, Quant, SetLit, Unary, conjuncts_of)
from slpverify.kernel import Atom
from slpverify.semantics import (CHECKMARK, assert_conjunction, loop_invariant,
                                 while_exit_pred)
from slpverify.stmt import (Assert, BeginEnd, If, Stop, Sub, While, seq_items)


class NaiveError(Exception):
    pass


def ndiv(a, b):
    if b == 0:
        raise NaiveError("div by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def neval(node, env, interp):
    """env maps 'x', "x'", "x''" to values."""
    if isinstance(node, IntLit):
        return node.value
    if isinstance(node, BoolLit):
        return node.value
    if isinstance(node, Name):
        key = node.text + "'" * node.primes
        if key not in env:
            raise NaiveError(f"unbound {key}")
        return env[key]
    if isinstance(node, BaseSet):
        lo, hi = interp.bound
        if node.name == "INT":
            return frozenset(range(lo, hi + 1))
        if node.name == "NAT":
            return frozenset(range(max(0, lo), hi + 1))
        return frozenset((False, True))
    if isinstance(node, Unary):
        v = neval(node.operand, env, interp)
        return -v if node.op == "neg" else (not v)
    if isinstance(node, BoolCast):
        return neval(node.pred, env, interp)
    if isinstance(node, SetLit):
        return frozenset(neval(i, env, interp) for i in node.items)
    if isinstance(node, Apply):
        fn = neval(node.fn, env, interp)
        arg = neval(node.arg, env, interp)
        hits = [b for (a, b) in fn if a == arg]
        if len(hits) != 1:
            raise NaiveError("partial application")
        return hits[0]
    if isinstance(node, Quant):
        domains = []
        for n in node.names:
            domains.append(_binder_domain(node, n, env, interp))
        for combo in itertools.product(*domains):
            inner = dict(env)
            inner.update(zip(node.names, combo))
            got = neval(node.body, inner, interp)
            if node.kind == "forall" and not got:
                return False
            if node.kind == "exists" and got:
                return True
        return node.kind == "forall"
    if isinstance(node, Binary):
        op = node.op
        a = neval(node.left, env, interp)
        b = neval(node.right, env, interp)
        if op == "and":
            return a and b
        if op == "or":
            return a or b
        if op == "=>":
            return (not a) or b
        if op == "<=>":
            return a == b
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "div":
            return ndiv(a, b)
        if op == "mod":
            return a - b * ndiv(a, b)
        if op == "=":
            return a == b
        if op == "/=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "in":
            return a in b
        if op == "notin":
            return a not in b
        if op == "subset":
            return a <= b
        if op == "union":
            return a | b
        if op == "inter":
            return a & b
        if op == "diff":
            return a - b
        if op == "upto":
            return frozenset(range(a, b + 1))
        if op == "maplet":
            return (a, b)
    raise NaiveError(f"cannot evaluate {node!r}")


def _binder_domain(quant, name, env, interp):
    pool = conjuncts_of(quant.body.left) \
        if isinstance(quant.body, Binary) and quant.body.op == "=>" \
        else conjuncts_of(quant.body)
    for c in pool:
        if (isinstance(c, Binary) and c.op == "in"
                and isinstance(c.left, Name) and c.left.text == name
                and c.left.primes == 0):
            free = {t for t, _ in _free(c.right)}
            if not (free & set(quant.names)):
                try:
                    return sorted(neval(c.right, env, interp), key=_vkey)
                except NaiveError:
                    break
    lo, hi = interp.bound
    return list(range(lo, hi + 1))


def _free(node):
    from slpverify.expr import free_names
    return free_names(node)


def _vkey(v):
    from slpverify.kernel import value_key
    return value_key(v)


def type_values(t, interp):
    lo, hi = interp.bound
    if t == ("int",):
        return list(range(lo, hi + 1))
    if t == ("bool",):
        return [False, True]
    if t[0] == "given":
        atoms = interp.set_atoms(t[1])
        return sorted(atoms, key=_vkey)
    if t[0] == "set":
        elems = type_values(t[1], interp)
        out = []
        for r in range(len(elems) + 1):
            out.extend(frozenset(c) for c in itertools.combinations(elems, r))
        return sorted(out, key=_vkey)
    if t[0] == "pair":
        return [(a, b) for a in type_values(t[1], interp)
                for b in type_values(t[2], interp)]
    raise NaiveError(f"no domain for {t}")


def base_env(interp):
    env = {}
    for n, v in interp.consts:
        env[n] = v
    for n, atoms in interp.sets:
        env[n] = frozenset(atoms)
        for a in atoms:
            env[a.name] = a
    return env


def states_of(scope, interp):
    """Raw product of type domains filtered by every invariant conjunct."""
    consts = base_env(interp)
    names = scope.all_vars
    domains = [type_values(scope.type_of(n), interp) for n in names]
    out = []
    for combo in itertools.product(*domains):
        env = dict(consts)
        env.update(zip(names, combo))
        ok = True
        for _, pred in scope.conjuncts:
            try:
                if not neval(pred, env, interp):
                    ok = False
                    break
            except NaiveError:
                ok = False
                break
        if ok:
            out.append(dict(zip(names, combo)))
    return out


def holds(pred, env, interp):
    try:
        return bool(neval(pred, env, interp))
    except NaiveError:
        return False


# --- naive statement relations ------------------------------------------------

def successors(stmt, env, scope, interp, consts):
    """Naive after-environments of a statement from one state env."""
    names = scope.all_vars
    if isinstance(stmt, Stop):
        return [CHECKMARK]
    if isinstance(stmt, Assert):
        full = {**consts, **env}
        if holds(assert_conjunction(stmt), full, interp):
            return [dict(env)]
        return []
    if isinstance(stmt, Sub):
        per_part = []
        for part in stmt.parts:
            full = {**consts, **env}
            if part.kind == "eq":
                try:
                    per_part.append([(part.targets, (neval(part.rhs, full, interp),))])
                except NaiveError:
                    return []
            elif part.kind == "in":
                try:
                    pool = neval(part.rhs, full, interp)
                except NaiveError:
                    return []
                if not pool:
                    return []
                per_part.append([(part.targets, (v,))
                                 for v in sorted(pool, key=_vkey)])
            else:
                choices = []
                doms = [type_values(scope.type_of(t), interp)
                        for t in part.targets]
                for combo in itertools.product(*doms):
                    trial = dict(full)
                    trial.update({t + "'": v
                                  for t, v in zip(part.targets, combo)})
                    for v in names:
                        trial.setdefault(v + "'", env[v])
                    if holds(part.rhs, trial, interp):
                        choices.append((part.targets, combo))
                if not choices:
                    return []
                per_part.append(choices)
        out = []
        for pick in itertools.product(*per_part):
            nxt = dict(env)
            for targets, values in pick:
                nxt.update(zip(targets, values))
            if nxt not in out:
                out.append(nxt)
        return out
    if isinstance(stmt, If):
        full = {**consts, **env}
        for cond, body in stmt.branches:
            if holds(cond, full, interp):
                return block_successors(seq_items(body), env, scope, interp, consts)
        if stmt.else_body is not None:
            return block_successors(seq_items(stmt.else_body), env, scope,
                                    interp, consts)
        return [dict(env)]
    if isinstance(stmt, While):
        # relational reading: assert of (not c and LI); termination handled by VAR
        full = {**consts, **env}
        if holds(while_exit_pred(stmt), full, interp):
            return [dict(env)]
        return []
    if isinstance(stmt, BeginEnd):
        raise NaiveError("naive oracle does not model begin-end")
    return block_successors(seq_items(stmt), env, scope, interp, consts)


def block_successors(items, env, scope, interp, consts):
    """Sequence with the forgetful rule cut at the last assert-like item."""
    cut = None
    for k in range(len(items) - 2, -1, -1):
        if isinstance(items[k], (Assert, While)):
            cut = k
            break
    if cut is not None:
        gate = items[cut]
        pred = assert_conjunction(gate) if isinstance(gate, Assert) \
            else while_exit_pred(gate)
        full = {**consts, **env}
        if not holds(pred, full, interp):
            return [dict(env)]  # diamond: uncovered states keep their values
        rest = block_successors(items[cut + 1:], env, scope, interp, consts)
        return rest if rest else [dict(env)]
    results = [dict(env)]
    for item in items:
        nxt = []
        for e in results:
            if e is CHECKMARK:
                if e not in nxt:
                    nxt.append(e)
                continue
            for s in successors(item, e, scope, interp, consts):
                if s not in nxt:
                    nxt.append(s)
        results = nxt
    return results


# --- naive termination and PO re-checking --------------------------------------

def naive_trm(loop, scope, interp, consts):
    from slpverify.scopes import push_loop
    inner = push_loop(scope, loop)
    for env in states_of(inner, interp):
        full = {**consts, **env}
        if not holds(loop.cond, full, interp):
            continue
        try:
            v = neval(loop.variant, full, interp)
        except NaiveError:
            return False
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            return False
        for succ in block_successors(seq_items(loop.body), env, inner,
                                     interp, consts):
            if succ is CHECKMARK:
                continue
            try:
                v2 = neval(loop.variant, {**consts, **succ}, interp)
            except NaiveError:
                return False
            if v2 >= v:
                return False
    return True


def _gated_block_successors(items, env, scope, interp, consts):
    """block_successors with the termination gate on forgetful While cuts."""
    cut = None
    for k in range(len(items) - 2, -1, -1):
        if isinstance(items[k], (Assert, While)):
            cut = k
            break
    if cut is not None and isinstance(items[cut], While) \
            and not naive_trm(items[cut], scope, interp, consts):
        return [dict(env)]  # empty exit set: diamond keeps every state
    return block_successors(items, env, scope, interp, consts)


def _stmt_successors_gated(stmt, env, scope, interp, consts):
    if isinstance(stmt, While) and not naive_trm(stmt, scope, interp, consts):
        return []
    if isinstance(stmt, If):
        full = {**consts, **env}
        for cond, body in stmt.branches:
            if holds(cond, full, interp):
                out = _gated_block_successors(seq_items(body), env, scope,
                                              interp, consts)
                return out if out else [dict(env)]
        if stmt.else_body is not None:
            out = _gated_block_successors(seq_items(stmt.else_body), env,
                                          scope, interp, consts)
            return out if out else [dict(env)]
        return [dict(env)]
    return successors(stmt, env, scope, interp, consts)


def _rely_succ(envs, rely, scope, interp, consts):
    out = []
    pool = states_of(scope, interp)
    for e in envs:
        for t in pool:
            trial = {**consts, **e}
            trial.update({k + "'": v for k, v in t.items()})
            if holds(rely, trial, interp):
                if t not in out:
                    out.append(t)
    return out


def _raw_envs(scope, interp):
    names = scope.all_vars
    domains = [type_values(scope.type_of(n), interp) for n in names]
    for combo in itertools.product(*domains):
        yield dict(zip(names, combo))


def recheck(po, session) -> str:
    """Naive verdict for a PO: 'discharged' or 'violated'."""
    form = po.form
    interp = session.interp
    consts = base_env(interp)
    scope = form.scope
    kind = form.kind

    def conj_holds(env) -> bool:
        full = {**consts, **env}
        return all(holds(p, full, interp) for _, p in scope.conjuncts)

    if kind == "axm":
        ok = all(holds(a.pred, consts, interp)
                 for a in session.model.context.axioms)
        return "discharged" if ok else "violated"

    if kind == "thm":
        for env in states_of(scope, interp):
            full = {**consts, **env}
            if all(holds(p, full, interp) for _, p in form.prior_theorems):
                if not holds(form.goal, full, interp):
                    return "violated"
        return "discharged"

    if kind in ("wd", "inv", "grt"):
        found_applicable = False
        for env in states_of(scope, interp):
            full = {**consts, **env}
            if not holds(form.context, full, interp):
                continue
            succ = _stmt_successors_gated(form.stmt, env, scope, interp, consts)
            if kind == "wd":
                if succ:
                    found_applicable = True
                    if not session.options.strict_feasibility:
                        return "discharged"
                elif session.options.strict_feasibility:
                    return "violated"
                continue
            for s in succ:
                if s is CHECKMARK:
                    continue
                if kind == "inv":
                    if not conj_holds(s):
                        return "violated"
                else:
                    trial = dict(full)
                    trial.update({k + "'": v for k, v in s.items()})
                    if not holds(form.guarantee, trial, interp):
                        return "violated"
        if kind == "wd":
            if session.options.strict_feasibility:
                return "discharged"
            return "discharged" if found_applicable else "violated"
        return "discharged"

    if kind == "asn":
        goal = form.goal
        states = states_of(scope, interp)
        if form.prev_stmt is not None:
            image = []
            for env in states:
                for s in _stmt_successors_gated(form.prev_stmt, env, scope,
                                                interp, consts):
                    if s is not CHECKMARK and s not in image:
                        image.append(s)
        elif form.pre_assert is not None:
            if form.prev_loop is not None and \
                    not naive_trm(form.prev_loop, scope, interp, consts):
                image = []
            else:
                image = [e for e in states
                         if holds(form.pre_assert, {**consts, **e}, interp)]
        else:
            image = states
        if form.rely is not None:
            image = _rely_succ(image, form.rely, scope, interp, consts)
        for e in image:
            full = {**consts, **e}
            if not (conj_holds(e) and holds(goal, full, interp)):
                return "violated"
        return "discharged"

    if kind == "var":
        return "discharged" if naive_trm(form.loop, scope, interp, consts) \
            else "violated"

    if kind in ("fis", "cmp"):
        for env in states_of(scope, interp):
            full = {**consts, **env}
            for after in _raw_envs(scope, interp):
                trial = dict(full)
                trial.update({k + "'": v for k, v in after.items()})
                if kind == "fis":
                    if holds(form.rely, trial, interp) and not conj_holds(after):
                        return "violated"
                else:
                    if form.rely is None:
                        continue
                    g_ok = form.guarantee is None or \
                        holds(form.guarantee, trial, interp)
                    if g_ok and not holds(form.rely, trial, interp):
                        return "violated"
        return "discharged"

    if kind == "clo_refl":
        for env in states_of(scope, interp):
            trial = {**consts, **env}
            trial.update({k + "'": v for k, v in env.items()})
            if not holds(form.rely, trial, interp):
                return "violated"
        return "discharged"

    if kind == "clo_trans":
        pool = states_of(scope, interp)
        for a in pool:
            for b in pool:
                t1 = {**consts, **a}
                t1.update({k + "'": v for k, v in b.items()})
                if not holds(form.rely, t1, interp):
                    continue
                for c in pool:
                    t2 = {**consts, **b}
                    t2.update({k + "'": v for k, v in c.items()})
                    if not holds(form.rely, t2, interp):
                        continue
                    t3 = {**consts, **a}
                    t3.update({k + "'": v for k, v in c.items()})
                    if not holds(form.rely, t3, interp):
                        return "violated"
        return "discharged"

    if kind == "ref":
        machine = session.model.machine
        inter_mode = session.options.ref_mode == "inter"
        for env in states_of(scope, interp):
            full = {**consts, **env}
            for after in _raw_envs(scope, interp):
                trial = dict(full)
                trial.update({k + "'": v for k, v in after.items()})
                if not holds(form.guarantee, trial, interp):
                    continue
                covered = []
                for ev in form.events:
                    if ev.guard is not None and not holds(ev.guard, full, interp):
                        covered.append(False)
                        continue
                    succ = successors(ev.action, env, scope, interp, consts)
                    covered.append(after in succ)
                ok = all(covered) if inter_mode else any(covered)
                if not ok:
                    return "violated"
        return "discharged"

    raise NaiveError(f"no naive route for {kind}")
