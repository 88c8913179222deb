"""Small-step semantics of process terms and reachability to transition systems.

The step relation builds in patience: a process offering visible events is
also willing to let time pass (tock) unless an exhausted deadline forbids it.
Maximal progress is applied afterwards, on the explored transition system,
by :func:`apply_timed_priority`.

Termination ends the observation: every tick transition leads to ``OMEGA``,
which has no transitions at all.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ExplorationLimitError, LinkageError
from .events import TAU, TICK, TOCK, EventLabel, sorted_events
from .terms import (
    OMEGA,
    SKIP,
    STOP,
    Chaos,
    Deadline,
    Definitions,
    Exception_,
    ExternalChoice,
    Hide,
    InternalChoice,
    NamedRef,
    Omega,
    Parallel,
    Prefix,
    ProcessTerm,
    Sequential,
    Skip,
    Stop,
    TockRun,
    external_choice,
    term_key,
)

DEFAULT_MAX_STATES = 10_000_000

EMPTY_DEFS: Definitions = {}

Transition = tuple[EventLabel, ProcessTerm]


def step(term: ProcessTerm, defs: Definitions = EMPTY_DEFS) -> tuple[Transition, ...]:
    """All enabled transitions of ``term``, sorted canonically.

    Mathematically a set; returned as a deduplicated tuple so that every
    caller sees the same order.
    """
    return _step(term, defs, ())


def _step(term: ProcessTerm, defs: Definitions, visiting: tuple[str, ...]) -> tuple[Transition, ...]:
    moves = _raw_step(term, defs, visiting)
    fixed = {(e, OMEGA if e.kind == "tick" else t) for (e, t) in moves}
    return tuple(sorted(fixed, key=lambda m: (m[0].sort_key(), term_key(m[1]))))


def _raw_step(term, defs, visiting) -> list[Transition]:
    if isinstance(term, Stop):
        return [(TOCK, STOP)]
    if isinstance(term, TockRun):
        return [(TOCK, term)]
    if isinstance(term, Omega):
        return []
    if isinstance(term, Skip):
        return [(TICK, OMEGA), (TOCK, SKIP)]
    if isinstance(term, Prefix):
        if term.event == TOCK:
            return [(TOCK, term.then)]
        return [(term.event, term.then), (TOCK, term)]
    if isinstance(term, ExternalChoice):
        return _step_external(term, defs, visiting)
    if isinstance(term, InternalChoice):
        return [(TAU, b) for b in term.branches]
    if isinstance(term, Sequential):
        out: list[Transition] = []
        for e, t in _step(term.first, defs, visiting):
            if e.kind == "tick":
                out.append((TAU, term.second))
            else:
                out.append((e, Sequential(t, term.second)))
        return out
    if isinstance(term, Hide):
        out = []
        for e, t in _step(term.term, defs, visiting):
            wrapped = Hide(t, term.events)
            out.append((TAU, wrapped) if e in term.events else (e, wrapped))
        return out
    if isinstance(term, Exception_):
        out = []
        for e, t in _step(term.term, defs, visiting):
            if e in term.events:
                out.append((e, term.handler))
            else:
                out.append((e, Exception_(t, term.events, term.handler)))
        return out
    if isinstance(term, Parallel):
        return _step_parallel(term, defs, visiting)
    if isinstance(term, Chaos):
        moves = [(e, term) for e in term.events]
        moves.append((TOCK, term))
        return moves
    if isinstance(term, Deadline):
        moves = [(e, SKIP) for e in term.events]
        if term.budget > 0:
            moves.append((TOCK, Deadline(term.events, term.budget - 1)))
        return moves
    if isinstance(term, NamedRef):
        if term.name in visiting:
            raise LinkageError(term.name, "unguarded recursion")
        try:
            body = defs[term.name]
        except KeyError:
            raise LinkageError(term.name) from None
        # keep self-loops on the reference, not its unfolding
        return [
            (e, term if t == body else t)
            for e, t in _step(body, defs, visiting + (term.name,))
        ]
    raise TypeError(f"not a process term: {term!r}")


def _step_external(term: ExternalChoice, defs, visiting) -> list[Transition]:
    out: list[Transition] = []
    tock_successors: list[list[ProcessTerm]] = []
    can_tock = True
    for i, branch in enumerate(term.branches):
        tocks: list[ProcessTerm] = []
        for e, t in _step(branch, defs, visiting):
            if e.kind == "tock":
                tocks.append(t)
            elif e.kind == "tau":
                rest = term.branches[:i] + (t,) + term.branches[i + 1 :]
                out.append((TAU, external_choice(rest)))
            else:
                # visible events and tick resolve the choice
                out.append((e, t))
        if not tocks:
            can_tock = False
        tock_successors.append(tocks)
    if can_tock:
        for combo in itertools.product(*tock_successors):
            out.append((TOCK, external_choice(combo)))
    return out


def _step_parallel(term: Parallel, defs, visiting) -> list[Transition]:
    sync = term.sync
    left_moves = _step(term.left, defs, visiting)
    right_moves = _step(term.right, defs, visiting)
    out: list[Transition] = []
    for e, t in left_moves:
        if e.kind in ("tock", "tick") or e in sync:
            continue
        out.append((e, Parallel(t, sync, term.right)))
    for e, t in right_moves:
        if e.kind in ("tock", "tick") or e in sync:
            continue
        out.append((e, Parallel(term.left, sync, t)))
    right_by_event: dict[EventLabel, list[ProcessTerm]] = {}
    for e, t in right_moves:
        right_by_event.setdefault(e, []).append(t)
    for e, t in left_moves:
        if not (e.kind in ("tock", "tick") or e in sync):
            continue
        for rt in right_by_event.get(e, ()):
            out.append((e, Parallel(t, sync, rt)))
    return out


def interleave(left: ProcessTerm, right: ProcessTerm) -> Parallel:
    """Interleaving: parallel with an empty sync set (time still synchronises)."""
    return Parallel(left, frozenset(), right)


@dataclass(frozen=True)
class Lts:
    """Explicit labelled transition system over canonical term states.

    State 0 is initial; ``edges[s]`` lists ``(label, target)`` pairs in
    canonical order.  ``terms[s]`` is the term the state stands for.
    """

    edges: tuple[tuple[tuple[EventLabel, int], ...], ...]
    terms: tuple[ProcessTerm, ...]
    alphabet: frozenset[EventLabel]
    initial: int = 0

    @property
    def n_states(self) -> int:
        return len(self.edges)

    @property
    def n_transitions(self) -> int:
        return sum(len(es) for es in self.edges)

    def enabled(self, state: int) -> tuple[EventLabel, ...]:
        return tuple(e for e, _ in self.edges[state])


def explode(
    term: ProcessTerm,
    defs: Definitions = EMPTY_DEFS,
    alphabet: frozenset[EventLabel] | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> Lts:
    """Reachability closure of the step relation as an ``Lts``.

    Deterministic: states are numbered in breadth-first discovery order with
    successors expanded in canonical event order, so two runs on the same
    input produce identical systems.
    """
    index: dict[ProcessTerm, int] = {term: 0}
    order: list[ProcessTerm] = [term]
    edges: list[tuple[tuple[EventLabel, int], ...]] = []
    seen_events: set[EventLabel] = set()
    frontier = 0
    while frontier < len(order):
        current = order[frontier]
        frontier += 1
        row: list[tuple[EventLabel, int]] = []
        for e, t in step(current, defs):
            target = index.get(t)
            if target is None:
                if len(order) >= max_states:
                    raise ExplorationLimitError(max_states, len(order) - frontier)
                target = len(order)
                index[t] = target
                order.append(t)
            row.append((e, target))
            if e.is_visible:
                seen_events.add(e)
        edges.append(tuple(row))
    if alphabet is None:
        alphabet = frozenset(seen_events)
    return Lts(edges=tuple(edges), terms=tuple(order), alphabet=alphabet)


def apply_timed_priority(lts: Lts) -> Lts:
    """Maximal progress: drop tock wherever an internal or tick step is enabled.

    Visible events never suppress tock.  States unreachable once their
    incoming tocks are gone are pruned, so every state of the result is
    reachable.  Idempotent.
    """
    new_edges = []
    for row in lts.edges:
        urgent = any(e.kind in ("tau", "tick") for e, _ in row)
        if urgent:
            row = tuple((e, t) for e, t in row if e.kind != "tock")
        new_edges.append(row)
    # renumber in discovery order from the initial state
    remap: dict[int, int] = {lts.initial: 0}
    order = [lts.initial]
    frontier = 0
    while frontier < len(order):
        s = order[frontier]
        frontier += 1
        for _, t in new_edges[s]:
            if t not in remap:
                remap[t] = len(order)
                order.append(t)
    edges = tuple(
        tuple((e, remap[t]) for e, t in new_edges[s]) for s in order
    )
    terms = tuple(lts.terms[s] for s in order) if lts.terms else ()
    return Lts(edges=edges, terms=terms, alphabet=lts.alphabet, initial=0)


def reachable_events(lts: Lts) -> frozenset[EventLabel]:
    out = set()
    for row in lts.edges:
        for e, _ in row:
            out.add(e)
    return frozenset(out)


def prepare(
    term: ProcessTerm,
    defs: Definitions = EMPTY_DEFS,
    alphabet: frozenset[EventLabel] | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> Lts:
    """Explode and apply timed priority; the standard pipeline before checking."""
    return apply_timed_priority(explode(term, defs, alphabet, max_states))
