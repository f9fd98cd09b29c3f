"""Per-run analysis session: interpretation, caches, tunable options."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .expr import Node
from .kernel import (Compiler, Interpretation, StateSpace,
                     build_interpretation, enumerate_space, satisfaction)
from .model import SlpModel
from .scopes import ScopeContext
from .typecheck import TypeInfo, infer_types

DEFAULT_STATE_CAP = 10_000_000


def state_cap_from_env() -> int:
    raw = os.environ.get("SLP_STATE_CAP")
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return DEFAULT_STATE_CAP


@dataclass(frozen=True)
class Options:
    strict_paper: bool = False
    strict_feasibility: bool = False
    ref_mode: str = "inter"  # inter | union
    state_cap: int = field(default_factory=state_cap_from_env)
    workers: int = 1
    trace_mode: str = "serial"  # serial | atomic parallel labels


class Session:
    """Owns the interpretation and memoizes spaces, compilers and relations."""

    def __init__(self, model: SlpModel, options: Options | None = None,
                 info: TypeInfo | None = None,
                 interp: Interpretation | None = None):
        self.model = model
        self.options = options or Options()
        self.info = info if info is not None else infer_types(model)
        self.interp = interp if interp is not None else build_interpretation(model)
        self._compilers: dict[ScopeContext, Compiler] = {}
        self._spaces: dict[ScopeContext, StateSpace] = {}
        self._sats: dict[tuple, frozenset] = {}
        self._relations: dict[tuple, object] = {}
        self._trm: dict[int, object] = {}

    def compiler(self, scope: ScopeContext) -> Compiler:
        comp = self._compilers.get(scope)
        if comp is None:
            comp = Compiler(scope, self.interp)
            self._compilers[scope] = comp
        return comp

    def space(self, scope: ScopeContext) -> StateSpace:
        space = self._spaces.get(scope)
        if space is None:
            space = enumerate_space(scope, self.interp, self.options.state_cap,
                                    self.compiler(scope))
            self._spaces[scope] = space
        return space

    def sat(self, scope: ScopeContext, pred: Node) -> frozenset:
        key = (scope, pred)
        out = self._sats.get(key)
        if out is None:
            out = satisfaction(pred, self.space(scope), self.compiler(scope))
            self._sats[key] = out
        return out
