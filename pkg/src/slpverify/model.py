"""Top-level model structure: context, units, machine, refinement maps, CHECK data."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .expr import Node
from .span import Span
from .stmt import InvariantDef, NamedPred, Statement, Sub

LABEL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_label(text: str) -> bool:
    return bool(LABEL_RE.match(text))


@dataclass(frozen=True)
class Decl:
    span: Span | None = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Context(Decl):
    sets: tuple[str, ...] = ()
    constants: tuple[str, ...] = ()
    axioms: tuple[NamedPred, ...] = ()


@dataclass(frozen=True)
class EnvironmentDef(Decl):
    label: str = ""
    refines: tuple[str, ...] = ()
    relies: tuple[NamedPred, ...] = ()
    guarantees: tuple[NamedPred, ...] = ()


@dataclass(frozen=True)
class ProcessDef(Decl):
    label: str = ""
    refines: tuple[str, ...] = ()
    locals: tuple[str, ...] = ()
    relies: tuple[NamedPred, ...] = ()
    guarantees: tuple[NamedPred, ...] = ()
    invariants: tuple[InvariantDef, ...] = ()
    body: Optional[Statement] = None


@dataclass(frozen=True)
class Event(Decl):
    label: str = ""
    guard: Optional[Node] = None
    action: Sub = None  # type: ignore[assignment]


@dataclass(frozen=True)
class EventBMachine(Decl):
    name: str = ""
    variables: tuple[str, ...] = ()
    invariants: tuple[NamedPred, ...] = ()
    initialisation: Sub = None  # type: ignore[assignment]
    events: tuple[Event, ...] = ()

    def event(self, label: str) -> Event:
        for e in self.events:
            if e.label == label:
                return e
        raise KeyError(label)


@dataclass(frozen=True)
class RefMap(Decl):
    """Alphabet map: process substitution labels to machine event labels."""

    process: str = ""
    pairs: tuple[tuple[str, str], ...] = ()

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)


@dataclass(frozen=True)
class CheckSection(Decl):
    """Finite bounds: integer interval, carrier set atoms, constant values.

    Constant values are stored as closed literal expressions and evaluated
    by the kernel when the interpretation is built.
    """

    bound: Optional[tuple[int, int]] = None
    sets: tuple[tuple[str, tuple[str, ...]], ...] = ()
    consts: tuple[tuple[str, Node], ...] = ()


@dataclass(frozen=True)
class SlpModel(Decl):
    name: str = ""
    context: Context = Context()
    globals: tuple[str, ...] = ()
    invariants: tuple[InvariantDef, ...] = ()
    initialisation: Optional[Sub] = None
    environments: tuple[EnvironmentDef, ...] = ()
    processes: tuple[ProcessDef, ...] = ()
    machine: Optional[EventBMachine] = None
    refmaps: tuple[RefMap, ...] = ()
    check: Optional[CheckSection] = None

    def process(self, label: str) -> ProcessDef:
        for p in self.processes:
            if p.label == label:
                return p
        raise KeyError(label)

    def refmap_for(self, process: str) -> Optional[RefMap]:
        for rm in self.refmaps:
            if rm.process == process:
                return rm
        return None

    @property
    def units(self) -> tuple:
        """Processes and environments in declaration order (environments first)."""
        return tuple(self.environments) + tuple(self.processes)
