"""Algebraic process terms.

Terms are immutable and hashable; structural equality doubles as state
identity during exploration.  Choice constructors keep their branches in a
canonical sorted order so that structurally equal processes written in a
different order collapse to one term.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping

from .events import EventLabel, sorted_events


class ProcessTerm:
    """Base class; concrete constructors are the dataclasses below."""

    __slots__ = ()

    def __str__(self) -> str:  # short structural rendering, mainly for debugging
        return render_term(self)


def _freeze_hash(term) -> None:
    object.__setattr__(term, "_hash", hash(_identity(term)))


def _identity(term):
    cls = type(term)
    vals = tuple(getattr(term, f.name) for f in fields(cls))
    return (cls.__name__, vals)


class _Hashed:
    __slots__ = ()

    def __hash__(self):
        return self._hash  # type: ignore[attr-defined]


@dataclass(frozen=True, eq=True)
class Stop(_Hashed, ProcessTerm):
    """Idle forever: refuses every event but lets time pass."""

    def __post_init__(self):
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Skip(_Hashed, ProcessTerm):
    """Terminate successfully (tick), waiting patiently until then."""

    def __post_init__(self):
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Omega(_Hashed, ProcessTerm):
    """The state after termination.  No transitions, not even tock.

    Not normally written by hand; ``step`` rewrites every tick successor to
    this term so that termination ends the observation.
    """

    def __post_init__(self):
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class TockRun(_Hashed, ProcessTerm):
    """Only ever performs tock."""

    def __post_init__(self):
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Prefix(_Hashed, ProcessTerm):
    event: EventLabel
    then: ProcessTerm

    def __post_init__(self):
        if self.event.kind in ("tau", "tick"):
            raise ValueError(f"cannot prefix with {self.event.kind}")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class ExternalChoice(_Hashed, ProcessTerm):
    branches: tuple[ProcessTerm, ...]

    def __post_init__(self):
        if len(self.branches) < 2:
            raise ValueError("external choice needs at least two branches")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class InternalChoice(_Hashed, ProcessTerm):
    branches: tuple[ProcessTerm, ...]

    def __post_init__(self):
        if not self.branches:
            raise ValueError("internal choice needs at least one branch")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Sequential(_Hashed, ProcessTerm):
    first: ProcessTerm
    second: ProcessTerm

    def __post_init__(self):
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Hide(_Hashed, ProcessTerm):
    term: ProcessTerm
    events: frozenset[EventLabel]

    def __post_init__(self):
        _check_visible(self.events, "hide")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Exception_(_Hashed, ProcessTerm):
    """Behave as ``term``; any event in ``events`` hands control to ``handler``."""

    term: ProcessTerm
    events: frozenset[EventLabel]
    handler: ProcessTerm

    def __post_init__(self):
        _check_visible(self.events, "exception")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Parallel(_Hashed, ProcessTerm):
    """Synchronise on ``sync`` plus tock and tick; interleave the rest."""

    left: ProcessTerm
    sync: frozenset[EventLabel]
    right: ProcessTerm

    def __post_init__(self):
        _check_visible(self.sync, "parallel sync set")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Chaos(_Hashed, ProcessTerm):
    """Traces-top over its event set: anything in the set may happen, patiently."""

    events: frozenset[EventLabel]

    def __post_init__(self):
        _check_visible(self.events, "chaos")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class Deadline(_Hashed, ProcessTerm):
    """One of ``events`` must occur within ``budget`` tocks; then terminate."""

    events: frozenset[EventLabel]
    budget: int

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("deadline budget must be non-negative")
        _check_visible(self.events, "deadline")
        _freeze_hash(self)


@dataclass(frozen=True, eq=True)
class NamedRef(_Hashed, ProcessTerm):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("empty process name")
        _freeze_hash(self)


def _check_visible(events, where: str) -> None:
    for e in events:
        if not e.is_visible:
            raise ValueError(f"{where} may not contain {e.kind} events")


STOP = Stop()
SKIP = Skip()
OMEGA = Omega()
TOCKRUN = TockRun()

# Definition environment: resolves NamedRef.  Plain mappings are fine; terms
# never mutate it.
Definitions = Mapping[str, ProcessTerm]

_ORDER = [
    Stop, Skip, Omega, TockRun, Prefix, ExternalChoice, InternalChoice,
    Sequential, Hide, Exception_, Parallel, Chaos, Deadline, NamedRef,
]
_ORDER_RANK = {cls: i for i, cls in enumerate(_ORDER)}


def term_key(term: ProcessTerm):
    """Total structural order over terms, used to canonicalise choices."""
    rank = _ORDER_RANK[type(term)]
    if isinstance(term, (Stop, Skip, Omega, TockRun)):
        return (rank,)
    if isinstance(term, Prefix):
        return (rank, term.event.sort_key(), term_key(term.then))
    if isinstance(term, (ExternalChoice, InternalChoice)):
        return (rank, tuple(term_key(b) for b in term.branches))
    if isinstance(term, Sequential):
        return (rank, term_key(term.first), term_key(term.second))
    if isinstance(term, Hide):
        return (rank, _set_key(term.events), term_key(term.term))
    if isinstance(term, Exception_):
        return (rank, _set_key(term.events), term_key(term.term), term_key(term.handler))
    if isinstance(term, Parallel):
        return (rank, _set_key(term.sync), term_key(term.left), term_key(term.right))
    if isinstance(term, Chaos):
        return (rank, _set_key(term.events))
    if isinstance(term, Deadline):
        return (rank, _set_key(term.events), term.budget)
    if isinstance(term, NamedRef):
        return (rank, term.name)
    raise TypeError(f"not a process term: {term!r}")


def _set_key(events):
    return tuple(e.sort_key() for e in sorted_events(events))


def external_choice(branches) -> ProcessTerm:
    """Canonical external choice: flattened, deduplicated, sorted.

    A single branch collapses to that branch; an empty choice is Stop.
    """
    flat: list[ProcessTerm] = []
    for b in branches:
        if isinstance(b, ExternalChoice):
            flat.extend(b.branches)
        else:
            flat.append(b)
    unique = sorted(set(flat), key=term_key)
    if not unique:
        return STOP
    if len(unique) == 1:
        return unique[0]
    return ExternalChoice(tuple(unique))


def internal_choice(branches) -> ProcessTerm:
    """Canonical internal choice.  A singleton is kept: it is still a tau step."""
    flat: list[ProcessTerm] = []
    for b in branches:
        if isinstance(b, InternalChoice):
            flat.extend(b.branches)
        else:
            flat.append(b)
    unique = sorted(set(flat), key=term_key)
    if not unique:
        raise ValueError("internal choice needs at least one branch")
    return InternalChoice(tuple(unique))


def prefix_chain(events, tail: ProcessTerm) -> ProcessTerm:
    term = tail
    for e in reversed(list(events)):
        term = Prefix(e, term)
    return term


def render_term(term: ProcessTerm, depth: int = 0) -> str:
    if depth > 6:
        return "..."
    if isinstance(term, Stop):
        return "STOP"
    if isinstance(term, Skip):
        return "SKIP"
    if isinstance(term, Omega):
        return "OMEGA"
    if isinstance(term, TockRun):
        return "TOCKRUN"
    if isinstance(term, Prefix):
        return f"{term.event} -> {render_term(term.then, depth + 1)}"
    if isinstance(term, ExternalChoice):
        inner = " [] ".join(render_term(b, depth + 1) for b in term.branches)
        return f"({inner})"
    if isinstance(term, InternalChoice):
        inner = " |~| ".join(render_term(b, depth + 1) for b in term.branches)
        return f"(|~| {inner})"
    if isinstance(term, Sequential):
        return f"({render_term(term.first, depth + 1)} ; {render_term(term.second, depth + 1)})"
    if isinstance(term, Hide):
        return f"({render_term(term.term, depth + 1)} \\ {_render_set(term.events)})"
    if isinstance(term, Exception_):
        return (
            f"({render_term(term.term, depth + 1)} [|{_render_set(term.events)}|> "
            f"{render_term(term.handler, depth + 1)})"
        )
    if isinstance(term, Parallel):
        return (
            f"({render_term(term.left, depth + 1)} [|{_render_set(term.sync)}|] "
            f"{render_term(term.right, depth + 1)})"
        )
    if isinstance(term, Chaos):
        return f"CHAOS{_render_set(term.events)}"
    if isinstance(term, Deadline):
        return f"DEADLINE({_render_set(term.events)}, {term.budget})"
    if isinstance(term, NamedRef):
        return term.name
    return repr(term)


def _render_set(events) -> str:
    shown = sorted_events(events)
    if len(shown) > 4:
        return "{" + ", ".join(str(e) for e in shown[:4]) + f", ...{len(shown)}}}"
    return "{" + ", ".join(str(e) for e in shown) + "}"
