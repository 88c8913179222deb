"""Refinement, timelock and termination checks over transition systems.

Tock and tick are observable: a trace is the sequence of visible events,
tocks and the final tick, with internal steps erased.  Counterexamples are
shortest by breadth-first search and canonical, so identical inputs always
produce identical verdicts.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

from .errors import ResourceError
from .events import EventLabel
from .semantics import DEFAULT_MAX_STATES, Lts, prepare
from .terms import (
    SKIP,
    Chaos,
    Deadline,
    Definitions,
    Exception_,
    Hide,
    NamedRef,
    Parallel,
    ProcessTerm,
    Sequential,
)

Trace = tuple[EventLabel, ...]


@dataclass(frozen=True)
class CheckStats:
    states: int = 0
    transitions: int = 0
    compile_seconds: float = 0.0
    verify_seconds: float = 0.0

    def timed(self, compile_seconds: float, verify_seconds: float) -> "CheckStats":
        return CheckStats(self.states, self.transitions, compile_seconds, verify_seconds)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    counterexample: Trace | None
    stats: CheckStats

    def __post_init__(self):
        if self.passed != (self.counterexample is None):
            raise ValueError("counterexample present iff the check failed")


@dataclass(frozen=True)
class Assertion:
    """One assertion over linked process terms.

    ``kind`` is one of ``traces_refinement`` (with ``spec``),
    ``timelock_free`` or ``does_not_terminate``.  ``hide`` is applied to the
    operand before checking.
    """

    name: str
    kind: str
    operand: ProcessTerm
    spec: ProcessTerm | None = None
    hide: frozenset[EventLabel] = frozenset()
    timed: bool = False

    def __post_init__(self):
        kinds = ("traces_refinement", "timelock_free", "does_not_terminate")
        if self.kind not in kinds:
            raise ValueError(f"unknown assertion kind {self.kind!r}")
        if (self.spec is not None) != (self.kind == "traces_refinement"):
            raise ValueError("refinement assertions take exactly one specification operand")
        for e in self.hide:
            if not e.is_visible:
                raise ValueError("hide sets contain visible events only")


# --------------------------------------------------------------------------
# Trace helpers

def tau_closure(lts: Lts, states: frozenset[int]) -> frozenset[int]:
    out = set(states)
    work = list(states)
    while work:
        s = work.pop()
        for e, t in lts.edges[s]:
            if e.kind == "tau" and t not in out:
                out.add(t)
                work.append(t)
    return frozenset(out)


def observable_step(lts: Lts, states: frozenset[int], event: EventLabel) -> frozenset[int]:
    targets = {t for s in states for e, t in lts.edges[s] if e == event}
    return tau_closure(lts, frozenset(targets)) if targets else frozenset()


def replay(lts: Lts, trace: Trace) -> list[frozenset[int]] | None:
    """State sets visited while replaying an observable trace; None if refused."""
    cur = tau_closure(lts, frozenset({lts.initial}))
    sets = [cur]
    for e in trace:
        cur = observable_step(lts, cur, e)
        if not cur:
            return None
        sets.append(cur)
    return sets


def refuses(lts: Lts, trace: Trace) -> bool:
    """True when the trace's last event is refused after its prefix."""
    if not trace:
        return False
    prefix = replay(lts, trace[:-1])
    if prefix is None:
        return True
    return not observable_step(lts, prefix[-1], trace[-1])


# --------------------------------------------------------------------------
# Core checks (inputs are prepared Ltss: exploded, timed priority applied)

def traces_refines(
    spec: Lts, impl: Lts, max_states: int = DEFAULT_MAX_STATES
) -> Verdict:
    """Does every observable trace of ``impl`` belong to ``spec``?

    Subset construction on the specification (tau closure, then
    determinisation over visible events, tock and tick) driven by a
    breadth-first product search; a failure yields the shortest violating
    trace, whose last event is the one the specification refuses.
    """
    macro0 = tau_closure(spec, frozenset({spec.initial}))
    macros: dict[frozenset[int], int] = {macro0: 0}
    macro_sets: list[frozenset[int]] = [macro0]
    delta: dict[tuple[int, EventLabel], int | None] = {}

    def macro_move(mid: int, event: EventLabel) -> int | None:
        key = (mid, event)
        if key in delta:
            return delta[key]
        target = observable_step(spec, macro_sets[mid], event)
        if not target:
            delta[key] = None
            return None
        if target not in macros:
            if len(macros) >= max_states:
                raise ResourceError(
                    f"specification determinisation exceeded {max_states} states",
                    states=len(macros),
                    transitions=len(delta),
                )
            macros[target] = len(macros)
            macro_sets.append(target)
        delta[key] = macros[target]
        return delta[key]

    start = (impl.initial, 0)
    visited = {start}
    parents: dict[tuple[int, int], tuple[tuple[int, int], EventLabel | None]] = {}
    work: deque[tuple[int, int]] = deque([start])
    transitions = 0

    def rebuild(node: tuple[int, int]) -> Trace:
        out: list[EventLabel] = []
        while node in parents:
            node, event = parents[node]
            if event is not None:
                out.append(event)
        return tuple(reversed(out))

    while work:
        node = work.popleft()
        i, mid = node
        for e, j in impl.edges[i]:
            transitions += 1
            if e.kind == "tau":
                nxt = (j, mid)
                if nxt not in visited:
                    visited.add(nxt)
                    parents[nxt] = (node, None)
                    work.appendleft(nxt)
                continue
            target = macro_move(mid, e)
            if target is None:
                trace = rebuild(node) + (e,)
                stats = CheckStats(states=len(visited), transitions=transitions)
                return Verdict(False, trace, stats)
            nxt = (j, target)
            if nxt not in visited:
                if len(visited) >= max_states:
                    raise ResourceError(
                        f"refinement product exceeded {max_states} states",
                        states=len(visited),
                        transitions=transitions,
                    )
                visited.add(nxt)
                parents[nxt] = (node, e)
                work.append(nxt)
    stats = CheckStats(states=len(visited), transitions=transitions)
    return Verdict(True, None, stats)


def _shortest_trace_to(
    lts: Lts,
    state_pred=None,
    edge_pred=None,
) -> Trace | None:
    """Shortest observable trace reaching a matching state or traversing a
    matching edge; internal steps cost nothing."""
    start = lts.initial
    visited = {start}
    parents: dict[int, tuple[int, EventLabel | None]] = {}
    work: deque[int] = deque([start])

    def rebuild(state: int, extra: EventLabel | None = None) -> Trace:
        out: list[EventLabel] = [] if extra is None else [extra]
        while state in parents:
            state, event = parents[state]
            if event is not None:
                out.append(event)
        return tuple(reversed(out))

    while work:
        s = work.popleft()
        if state_pred is not None and state_pred(s):
            return rebuild(s)
        for e, t in lts.edges[s]:
            if edge_pred is not None and edge_pred(s, e, t):
                return rebuild(s, None if e.kind == "tau" else e)
            if t in visited:
                continue
            visited.add(t)
            parents[t] = (s, None if e.kind == "tau" else e)
            if e.kind == "tau":
                work.appendleft(t)
            else:
                work.append(t)
    return None


def timelock_free(lts: Lts) -> Verdict:
    """Can time always eventually pass (or the process terminate)?

    Passes iff from every reachable state some finite path of non-tock
    transitions reaches a state where tock or tick is enabled.  The
    counterexample is a shortest trace to a state with no such path.
    """
    n = lts.n_states
    good = [any(e.kind in ("tock", "tick") for e, _ in row) for row in lts.edges]
    reverse: list[list[int]] = [[] for _ in range(n)]
    for s, row in enumerate(lts.edges):
        for e, t in row:
            if e.kind != "tock":
                reverse[t].append(s)
    ok = [False] * n
    work = [s for s in range(n) if good[s]]
    for s in work:
        ok[s] = True
    while work:
        t = work.pop()
        for s in reverse[t]:
            if not ok[s]:
                ok[s] = True
                work.append(s)
    stats = CheckStats(states=n, transitions=lts.n_transitions)
    if all(ok):
        return Verdict(True, None, stats)
    trace = _shortest_trace_to(lts, state_pred=lambda s: not ok[s])
    return Verdict(False, trace, stats)


def does_not_terminate(lts: Lts) -> Verdict:
    """Passes iff no tick transition is reachable."""
    stats = CheckStats(states=lts.n_states, transitions=lts.n_transitions)
    trace = _shortest_trace_to(lts, edge_pred=lambda s, e, t: e.kind == "tick")
    if trace is None:
        return Verdict(True, None, stats)
    return Verdict(False, trace, stats)


# --------------------------------------------------------------------------
# Derived process builders

def constrain_skip(term: ProcessTerm, events) -> ProcessTerm:
    """Forbid the given events: run ``term`` in parallel with a process that
    never performs them (and never blocks anything else)."""
    return Parallel(term, frozenset(events), SKIP)


def call_deadline_spec(
    alphabet,
    watch,
    required,
    defs: dict,
    *,
    budget: int = 0,
    name: str = "watchdog",
) -> ProcessTerm:
    """Anything may happen, but each watch event starts a call deadline.

    The recursive specification behaves chaotically over ``alphabet`` until
    an event in ``watch`` occurs; then one of ``required`` must follow within
    ``budget`` tocks, after which it recurses.
    """
    alphabet = frozenset(alphabet)
    watch = frozenset(watch)
    required = frozenset(required)
    if not watch <= alphabet:
        raise ValueError("watch events must belong to the alphabet")
    if not required <= alphabet:
        raise ValueError("required events must belong to the alphabet")
    ref = NamedRef(f"{name}.def")
    defs[ref.name] = Exception_(
        Chaos(alphabet), watch, Sequential(Deadline(required, budget), ref)
    )
    return ref


# --------------------------------------------------------------------------
# Assertion driver

def run_assertion(
    assertion: Assertion,
    defs: Definitions,
    max_states: int = DEFAULT_MAX_STATES,
) -> Verdict:
    """Explode the operands, apply timed priority, run the check."""
    t0 = time.perf_counter()
    operand = assertion.operand
    if assertion.hide:
        operand = Hide(operand, assertion.hide)
    impl = prepare(operand, defs, max_states=max_states)
    spec = None
    if assertion.kind == "traces_refinement":
        spec = prepare(assertion.spec, defs, max_states=max_states)
    t1 = time.perf_counter()
    if assertion.kind == "traces_refinement":
        verdict = traces_refines(spec, impl, max_states=max_states)
    elif assertion.kind == "timelock_free":
        verdict = timelock_free(impl)
    else:
        verdict = does_not_terminate(impl)
    t2 = time.perf_counter()
    return Verdict(
        verdict.passed,
        verdict.counterexample,
        verdict.stats.timed(t1 - t0, t2 - t1),
    )
