"""Compile state machines into process terms and compose them.

A compiled machine is a family of named process definitions, one per
reachable configuration (control node, pending actions, valuation).  Entry
actions and emissions are urgent: the event must happen before time passes.
Junction chains and plain assignments are folded into the incoming
transition, so they take neither time nor extra states.

Monitor guards (reads of another machine's progress) are enforced by a gate
process composed alongside the machine, which mirrors the tracked machine's
movements through its trigger events and admits the guarded triggers only
when the guard holds.  The guard is thereby evaluated atomically with the
trigger.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .errors import CompileError, CompositionError, EvalError
from .events import EventLabel, vis
from .machine import (
    Action,
    Assign,
    Call,
    Connection,
    Emit,
    EventDecl,
    Expr,
    FieldDecl,
    Machine,
    MachineState,
    MonitorDecl,
    OpDecl,
    Transition,
    eval_expr,
    expr_refs,
    render_expr,
)
from .terms import (
    SKIP,
    STOP,
    Deadline,
    Exception_,
    NamedRef,
    Parallel,
    ProcessTerm,
    Prefix,
    external_choice,
    internal_choice,
)

DEFAULT_VAR_WIDTH = 16
_JUNCTION_DEPTH = 100


@dataclass(frozen=True)
class PlatformDecl:
    """The open environment interface: events it drives, operations it serves."""

    name: str = "platform"
    events: tuple[EventDecl, ...] = ()
    operations: tuple[OpDecl, ...] = ()


@dataclass
class CompiledMachine:
    """One machine lowered to process definitions plus exploration metadata."""

    name: str
    machine: Machine
    bindings: dict[str, int]
    term: ProcessTerm
    alphabet: frozenset[EventLabel]
    configs: tuple[tuple, ...]          # config keys, index-aligned with names
    config_names: tuple[str, ...]
    defs: Mapping[str, ProcessTerm]

    def config_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.config_names)}

    def config_info(self, idx: int) -> tuple[str, str, dict[str, int]]:
        """(kind, node name, readable valuation) for one configuration."""
        cfg = self.configs[idx]
        kind = cfg[0]
        if kind in ("stable", "final"):
            _, node, val = cfg
        else:
            node = f"emitting {cfg[1]}"
            val = cfg[4]
        slots = _slot_names(self.machine)
        return kind, node, dict(zip(slots, val))

    def reachable_state_names(self) -> frozenset[str]:
        out = set()
        for cfg in self.configs:
            if cfg[0] in ("stable", "final"):
                out.add(cfg[1])
        return frozenset(out)

    def unreachable_state_names(self) -> tuple[str, ...]:
        reached = self.reachable_state_names()
        return tuple(s.name for s in self.machine.states if s.name not in reached)


def _slot_names(m: Machine) -> tuple[str, ...]:
    names: list[str] = []
    for v in m.variables:
        names.extend(v.slot_names())
    return tuple(names)


def _slot_fields(m: Machine) -> tuple[FieldDecl, ...]:
    out: list[FieldDecl] = []
    for v in m.variables:
        out.extend(v.fields)
    return tuple(out)


def machine_alphabet(m: Machine) -> frozenset[EventLabel]:
    """Every instance of every declared event and operation call."""
    out: set[EventLabel] = set()
    for e in m.events:
        decl = e.resolved(m.name)
        for combo in _domains(decl.fields):
            out.add(EventLabel("visible", decl.channel, decl.chan_direction, combo))
    for o in m.operations:
        decl = o.resolved(m.name)
        for combo in _domains(decl.params):
            out.add(EventLabel("visible", decl.channel, None, combo))
    return frozenset(out)


def _domains(fields: Sequence[FieldDecl]):
    if not fields:
        yield ()
        return
    for combo in itertools.product(*[f.domain() for f in fields]):
        yield tuple(combo)


def validate_machine(m: Machine, bindings: Mapping[str, int]) -> None:
    names: set[str] = set()
    for group in (m.states, m.junctions, m.variables, m.events, m.operations, m.constants):
        for item in group:
            if item.name in names:
                raise CompileError(f"{m.name}: duplicate declaration {item.name!r}")
            names.add(item.name)
    node_names = {s.name for s in m.states} | {j.name for j in m.junctions}
    if m.initial not in node_names:
        raise CompileError(f"{m.name}: initial node {m.initial!r} is not declared")
    consts = dict(_constants(m, bindings))
    slots = set(_slot_names(m))
    monitors = {mon.name for mon in m.monitors}
    for s in m.states:
        if s.final and (s.entry or s.exit):
            raise CompileError(f"{m.name}: final state {s.name!r} carries actions")
        if s.final and m.outgoing(s.name):
            raise CompileError(f"{m.name}: final state {s.name!r} has outgoing transitions")
    for t in m.transitions:
        if t.source not in node_names or t.target not in node_names:
            raise CompileError(f"{m.name}: transition endpoints {t.source!r} -> {t.target!r} undeclared")
        binder_slots: set[str] = set()
        if t.trigger is not None:
            try:
                decl = m.event(t.trigger.event)
            except KeyError:
                raise CompileError(f"{m.name}: unknown trigger event {t.trigger.event!r}") from None
            if decl.direction != "in":
                raise CompileError(f"{m.name}: trigger {decl.name!r} is not an input event")
            if t.trigger.binder is not None and not decl.fields:
                raise CompileError(f"{m.name}: trigger {decl.name!r} carries no payload to bind")
            if t.trigger.binder is not None:
                binder_slots = set(_binder_slots(t.trigger.binder, decl.fields))
            if m.node_kind(t.source) == "junction":
                raise CompileError(f"{m.name}: junction {t.source!r} has a triggered transition")
        known = slots | set(consts) | binder_slots
        if t.guard is not None:
            bad = expr_refs(t.guard) - known
            if bad & monitors:
                raise CompileError(
                    f"{m.name}: guard mixes monitor {sorted(bad & monitors)} with local state; "
                    "use a separate monitor guard"
                )
            if bad:
                raise CompileError(f"{m.name}: guard references undeclared {sorted(bad)}")
        if t.monitor_guard is not None:
            bad = expr_refs(t.monitor_guard) - monitors
            if bad:
                raise CompileError(
                    f"{m.name}: monitor guard references non-monitor names {sorted(bad)}"
                )
            if t.trigger is None:
                raise CompileError(f"{m.name}: monitor guards need a triggered transition")
        for a in t.actions:
            _validate_action(m, a, known)
    for s in m.states:
        for a in (*s.entry, *s.exit):
            _validate_action(m, a, slots | set(consts))
    for j in m.junctions:
        if not m.outgoing(j.name):
            raise CompileError(f"{m.name}: junction {j.name!r} has no outgoing transitions")


def _validate_action(m: Machine, a: Action, known: set[str]) -> None:
    if isinstance(a, Assign):
        if a.target not in known or a.target not in set(_slot_names(m)):
            raise CompileError(f"{m.name}: assignment to undeclared variable {a.target!r}")
        bad = expr_refs(a.expr) - known
    elif isinstance(a, Emit):
        try:
            decl = m.event(a.event)
        except KeyError:
            raise CompileError(f"{m.name}: emits undeclared event {a.event!r}") from None
        if len(a.args) != len(decl.fields):
            raise CompileError(f"{m.name}: event {a.event!r} takes {len(decl.fields)} values")
        bad = frozenset().union(*[expr_refs(x) for x in a.args]) if a.args else frozenset()
        bad = bad - known
    elif isinstance(a, Call):
        try:
            decl = m.operation(a.op)
        except KeyError:
            raise CompileError(f"{m.name}: calls undeclared operation {a.op!r}") from None
        if len(a.args) != len(decl.params):
            raise CompileError(f"{m.name}: operation {a.op!r} takes {len(decl.params)} arguments")
        bad = frozenset().union(*[expr_refs(x) for x in a.args]) if a.args else frozenset()
        bad = bad - known
    else:
        raise CompileError(f"{m.name}: unknown action {a!r}")
    if bad:
        raise CompileError(f"{m.name}: action references undeclared {sorted(bad)}")


def _constants(m: Machine, bindings: Mapping[str, int]):
    for c in m.constants:
        if c.name in bindings:
            yield c.name, int(bindings[c.name])
        elif c.value is not None:
            yield c.name, c.value
        else:
            raise CompileError(f"{m.name}: constant {c.name!r} is unbound")


def _binder_slots(binder: str, fields: Sequence[FieldDecl]) -> tuple[str, ...]:
    if len(fields) == 1 and not fields[0].name:
        return (binder,)
    return tuple(f"{binder}.{f.name}" for f in fields)


class _Compilation:
    def __init__(self, m: Machine, bindings: Mapping[str, int], defs: dict,
                 prefix: str, max_var_width: int, max_configs: int):
        self.m = m
        self.defs = defs
        self.prefix = prefix
        self.max_configs = max_configs
        self.consts = dict(_constants(m, bindings))
        self.slots = _slot_names(m)
        self.fields = _slot_fields(m)
        self.slot_index = {n: i for i, n in enumerate(self.slots)}
        for f, n in zip(self.fields, self.slots):
            if f.width > max_var_width:
                raise CompileError(
                    f"{m.name}: variable {n!r} spans {f.width} values (limit {max_var_width})"
                )
            if not f.contains(_initial_of(m, n)):
                raise CompileError(f"{m.name}: initial value of {n!r} out of range")
        self.events = {e.name: e.resolved(m.name) for e in m.events}
        self.ops = {o.name: o.resolved(m.name) for o in m.operations}
        self.index: dict[tuple, int] = {}
        self.order: list[tuple] = []
        self.queue: deque[tuple] = deque()

    # -- valuation helpers ---------------------------------------------------

    def _display(self, field: FieldDecl, raw: int):
        return bool(raw) if field.type_name == "bool" else raw

    def scope(self, val: tuple[int, ...], binding: tuple) -> dict:
        env = dict(self.consts)
        for n, f, raw in zip(self.slots, self.fields, val):
            env[n] = self._display(f, raw)
        for name, field, raw in binding:
            env[name] = self._display(field, raw)
        return env

    def eval_guard(self, guard: Expr | None, val, binding) -> bool:
        if guard is None:
            return True
        try:
            result = eval_expr(guard, self.scope(val, binding))
        except EvalError as exc:
            raise CompileError(f"{self.m.name}: guard {render_expr(guard)}: {exc}") from exc
        if not isinstance(result, bool):
            raise CompileError(f"{self.m.name}: guard {render_expr(guard)} is not boolean")
        return result

    def assign(self, val: tuple[int, ...], a: Assign, binding) -> tuple[int, ...]:
        idx = self.slot_index[a.target]
        field = self.fields[idx]
        try:
            v = eval_expr(a.expr, self.scope(val, binding))
        except EvalError as exc:
            raise CompileError(f"{self.m.name}: {a.target} := {render_expr(a.expr)}: {exc}") from exc
        raw = int(v)
        if not field.contains(raw):
            raise CompileError(
                f"{self.m.name}: assignment out of range: {a.target} := {raw} "
                f"not in [{field.lo}..{field.hi}]"
            )
        out = list(val)
        out[idx] = raw
        return tuple(out)

    def instance(self, a: Emit | Call, val, binding) -> EventLabel:
        if isinstance(a, Emit):
            decl = self.events[a.event]
            channel, direction, fields = decl.channel, decl.chan_direction, decl.fields
            what = f"event {a.event!r}"
        else:
            decl = self.ops[a.op]
            channel, direction, fields = decl.channel, None, decl.params
            what = f"operation {a.op!r}"
        values = []
        for expr, field in zip(a.args, fields):
            try:
                v = int(eval_expr(expr, self.scope(val, binding)))
            except EvalError as exc:
                raise CompileError(f"{self.m.name}: {what}: {exc}") from exc
            if not field.contains(v):
                raise CompileError(
                    f"{self.m.name}: {what} argument {render_expr(expr)} = {v} "
                    f"out of range [{field.lo}..{field.hi}]"
                )
            values.append(v)
        return EventLabel("visible", channel, direction, tuple(values))

    # -- configuration small-step --------------------------------------------

    def run(self, pending: tuple[Action, ...], cont: tuple, val, binding, depth: int) -> tuple:
        while pending:
            a = pending[0]
            if isinstance(a, Assign):
                val = self.assign(val, a, binding)
                pending = pending[1:]
                continue
            inst = self.instance(a, val, binding)
            return ("emit", inst, pending[1:], cont, val, binding)
        if cont[0] == "stable":
            return ("stable", cont[1], val)
        return self.enter(cont[1], val, depth)

    def enter(self, node: str, val, depth: int) -> tuple:
        if depth > _JUNCTION_DEPTH:
            raise CompileError(f"{self.m.name}: junction chain does not terminate")
        if self.m.node_kind(node) == "junction":
            for t in self.m.outgoing(node):
                if self.eval_guard(t.guard, val, ()):
                    return self.fire(t, val, (), depth + 1)
            readable = dict(zip(self.slots, val))
            raise CompileError(
                f"{self.m.name}: junction {node!r} is not exhaustive at valuation {readable}"
            )
        s = self.m.state(node)
        if s.final:
            return ("final", s.name, val)
        return self.run(s.entry, ("stable", s.name), val, (), depth)

    def fire(self, t: Transition, val, binding, depth: int = 0) -> tuple:
        pending: tuple[Action, ...] = ()
        if self.m.node_kind(t.source) == "state":
            pending += self.m.state(t.source).exit
        pending += t.actions
        return self.run(pending, ("enter", t.target), val, binding, depth)

    # -- construction ----------------------------------------------------------

    def ref(self, cfg: tuple) -> NamedRef:
        idx = self.index.get(cfg)
        if idx is None:
            if len(self.order) >= self.max_configs:
                raise CompileError(
                    f"{self.m.name}: more than {self.max_configs} machine configurations"
                )
            idx = len(self.order)
            self.index[cfg] = idx
            self.order.append(cfg)
            self.queue.append(cfg)
        return NamedRef(f"{self.prefix}#{idx}")

    def body(self, cfg: tuple) -> ProcessTerm:
        kind = cfg[0]
        if kind == "final":
            return SKIP
        if kind == "emit":
            _, inst, rest, cont, val, binding = cfg
            nxt = self.ref(self.run(rest, cont, val, binding, 0))
            single = frozenset({inst})
            return Exception_(Deadline(single, 0), single, nxt)
        _, sname, val = cfg
        for t in self.m.outgoing(sname):
            if t.trigger is not None:
                continue
            if self.eval_guard(t.guard, val, ()):
                return internal_choice([self.ref(self.fire(t, val, ()))])
        branches: list[ProcessTerm] = []
        for t in self.m.outgoing(sname):
            if t.trigger is None:
                continue
            decl = self.events[t.trigger.event]
            binder_names = (
                _binder_slots(t.trigger.binder, decl.fields) if t.trigger.binder else ()
            )
            for combo in _domains(decl.fields):
                binding = tuple(zip(binder_names, decl.fields, combo)) if binder_names else ()
                if not self.eval_guard(t.guard, val, binding):
                    continue
                inst = EventLabel("visible", decl.channel, decl.chan_direction, combo)
                branches.append(Prefix(inst, self.ref(self.fire(t, val, binding))))
        if not branches:
            return STOP
        return external_choice(branches)

    def compile(self) -> tuple[ProcessTerm, tuple[tuple, ...], tuple[str, ...]]:
        initial_val = tuple(
            raw for v in self.m.variables for raw in v.initial
        )
        root = self.ref(self.enter(self.m.initial, initial_val, 0))
        while self.queue:
            cfg = self.queue.popleft()
            name = f"{self.prefix}#{self.index[cfg]}"
            self.defs[name] = self.body(cfg)
        names = tuple(f"{self.prefix}#{i}" for i in range(len(self.order)))
        return root, tuple(self.order), names


def _initial_of(m: Machine, slot: str) -> int:
    for v in m.variables:
        for name, raw in zip(v.slot_names(), v.initial):
            if name == slot:
                return raw
    raise KeyError(slot)


def compile_machine_full(
    m: Machine,
    bindings: Mapping[str, int] | None = None,
    defs: dict | None = None,
    *,
    prefix: str | None = None,
    max_var_width: int = DEFAULT_VAR_WIDTH,
    max_configs: int = 1_000_000,
) -> CompiledMachine:
    """Compile one machine; definitions are appended to ``defs``."""
    bindings = dict(bindings or {})
    defs = defs if defs is not None else {}
    validate_machine(m, bindings)
    comp = _Compilation(m, bindings, defs, prefix or m.name, max_var_width, max_configs)
    term, configs, names = comp.compile()
    return CompiledMachine(
        name=m.name,
        machine=m,
        bindings=bindings,
        term=term,
        alphabet=machine_alphabet(m),
        configs=configs,
        config_names=names,
        defs=defs,
    )


def compile_machine(
    m: Machine,
    bindings: Mapping[str, int] | None = None,
    defs: dict | None = None,
    **kwargs,
) -> ProcessTerm:
    """Compile one machine to a process term (see :func:`compile_machine_full`)."""
    return compile_machine_full(m, bindings, defs, **kwargs).term


# --------------------------------------------------------------------------
# Monitor gates

def build_tracking_gate(
    monitored: Machine,
    monitor: MonitorDecl,
    tracked: Machine,
    enum_members: Mapping[str, int],
    defs: dict,
    *,
    prefix: str | None = None,
) -> tuple[ProcessTerm, frozenset[EventLabel], frozenset[EventLabel]]:
    """Gate realising guards over a monitor of another machine's progress.

    Returns ``(term, gate_alphabet, gated_instances)``.  The gate follows
    ``tracked`` through its trigger events and offers each gated trigger of
    ``monitored`` exactly when its monitor guard holds for the current value.
    """
    prefix = prefix or f"{monitored.name}.{monitor.name}.gate"
    if monitor.initial_member not in enum_members:
        raise CompositionError(
            f"monitor {monitor.name!r}: initial {monitor.initial_member!r} "
            f"is not a member of {monitor.enum_type!r}"
        )
    tracked_events = {e.name: e.resolved(tracked.name) for e in tracked.events}
    mirror: dict[str, list[tuple[EventLabel, str]]] = {s.name: [] for s in tracked.states}
    for t in tracked.transitions:
        if t.trigger is None or tracked.node_kind(t.source) != "state":
            raise CompositionError(
                f"monitor {monitor.name!r}: tracked machine {tracked.name!r} must use "
                "triggered state-to-state transitions only"
            )
        if tracked.node_kind(t.target) != "state":
            raise CompositionError(
                f"monitor {monitor.name!r}: tracked transition targets junction {t.target!r}"
            )
        decl = tracked_events[t.trigger.event]
        for combo in _domains(decl.fields):
            inst = EventLabel("visible", decl.channel, decl.chan_direction, combo)
            mirror[t.source].append((inst, t.target))

    gated: list[tuple[frozenset[EventLabel], Expr]] = []
    monitored_events = {e.name: e.resolved(monitored.name) for e in monitored.events}
    for t in monitored.transitions:
        if t.monitor_guard is None:
            continue
        refs = expr_refs(t.monitor_guard)
        if refs != {monitor.name}:
            raise CompositionError(
                f"monitor guard on {monitored.name!r} must reference exactly "
                f"{monitor.name!r}, got {sorted(refs)}"
            )
        decl = monitored_events[t.trigger.event]
        instances = frozenset(
            EventLabel("visible", decl.channel, decl.chan_direction, combo)
            for combo in _domains(decl.fields)
        )
        gated.append((instances, t.monitor_guard))

    gated_instances = frozenset().union(*[i for i, _ in gated]) if gated else frozenset()
    start = (tracked.initial, enum_members[monitor.initial_member])
    index: dict[tuple[str, int], int] = {}
    order: list[tuple[str, int]] = []
    queue: deque[tuple[str, int]] = deque()

    def ref(state: tuple[str, int]) -> NamedRef:
        if state not in index:
            index[state] = len(order)
            order.append(state)
            queue.append(state)
        return NamedRef(f"{prefix}#{index[state]}")

    root = ref(start)
    while queue:
        loc, value = queue.popleft()
        name = f"{prefix}#{index[(loc, value)]}"
        branches: list[ProcessTerm] = []
        for inst, target in mirror.get(loc, ()):
            nxt_value = enum_members.get(target, value)
            branches.append(Prefix(inst, ref((target, nxt_value))))
        for instances, guard in gated:
            if eval_expr(guard, {monitor.name: value}):
                for inst in sorted(instances, key=EventLabel.sort_key):
                    branches.append(Prefix(inst, ref((loc, value))))
        defs[name] = external_choice(branches) if branches else STOP

    tracked_wires = frozenset(i for moves in mirror.values() for i, _ in moves)
    return root, tracked_wires | gated_instances, gated_instances


def attach_gates(
    compiled: CompiledMachine,
    tracked_machines: Mapping[str, Machine],
    enum_tables: Mapping[str, Mapping[str, int]],
    defs: dict,
) -> tuple[ProcessTerm, frozenset[EventLabel]]:
    """Wrap a compiled machine with one gate per monitor declaration."""
    term = compiled.term
    alphabet = compiled.alphabet
    for monitor in compiled.machine.monitors:
        tracked = tracked_machines.get(monitor.tracks)
        if tracked is None:
            raise CompositionError(
                f"{compiled.name}: monitor {monitor.name!r} tracks unknown "
                f"machine {monitor.tracks!r}"
            )
        members = enum_tables.get(monitor.enum_type)
        if members is None:
            raise CompositionError(
                f"{compiled.name}: monitor {monitor.name!r} has unknown "
                f"enum type {monitor.enum_type!r}"
            )
        gate, gate_alpha, gated = build_tracking_gate(
            compiled.machine, monitor, tracked, members, defs
        )
        term = Parallel(term, gated, gate)
        alphabet = alphabet | gate_alpha
    return term, alphabet


# --------------------------------------------------------------------------
# Wiring and composition

def wire_machines(
    machines: Sequence[Machine],
    connections: Sequence[Connection],
    platform: PlatformDecl | None = None,
) -> list[Machine]:
    """Resolve event channels so connected endpoints share one label.

    Synchronous wires take the receiving endpoint's label unless the
    connection names one explicitly; asynchronous endpoints keep their own
    labels (a buffer bridges them at composition time).
    """
    by_name = {m.name: m for m in machines}
    platform_name = platform.name if platform else "platform"
    taken_inputs: set[tuple[str, str]] = set()
    channel_map: dict[tuple[str, str], tuple[str, str | None]] = {}

    for c in connections:
        from_decl = _endpoint_decl(by_name, platform, c.from_node, c.from_event, "out")
        to_decl = _endpoint_decl(by_name, platform, c.to_node, c.to_event, "in")
        if (c.to_node, c.to_event) in taken_inputs:
            raise CompositionError(
                f"two connections feed the input {c.to_event!r} of {c.to_node!r}"
            )
        taken_inputs.add((c.to_node, c.to_event))
        if from_decl is not None and to_decl is not None:
            if [(f.lo, f.hi) for f in from_decl.fields] != [(f.lo, f.hi) for f in to_decl.fields]:
                raise CompositionError(
                    f"payload mismatch on {c.from_node}.{c.from_event} -> "
                    f"{c.to_node}.{c.to_event}"
                )
        if c.async_:
            continue
        if c.wire is not None:
            wire = c.wire
            wire_dir = None if c.wire_direction == "unset" else c.wire_direction
            if c.wire_direction == "unset":
                wire_dir = _default_wire_dir(by_name, c, wire)
        else:
            wire = f"{c.to_node}.{c.to_event}"
            wire_dir = to_decl.direction if to_decl is not None else "in"
        if c.from_node in by_name:
            channel_map[(c.from_node, c.from_event)] = (wire, wire_dir)
        if c.to_node in by_name:
            channel_map[(c.to_node, c.to_event)] = (wire, wire_dir)

    out = []
    for m in machines:
        events = []
        for e in m.events:
            resolved = e.resolved(m.name)
            override = channel_map.get((m.name, e.name))
            if override is not None:
                resolved = replace(resolved, channel=override[0], chan_direction=override[1])
            events.append(resolved)
        out.append(replace(m, events=tuple(events)))
    return out


def _default_wire_dir(by_name, c: Connection, wire: str) -> str | None:
    # an explicit wire label that names some machine's event inherits its
    # direction tag, so every endpoint sharing the wire agrees on the label
    node, _, event = wire.rpartition(".")
    if node in by_name:
        try:
            return by_name[node].event(event).direction
        except KeyError:
            return None
    return None


def _endpoint_decl(by_name, platform, node: str, event: str, expected: str):
    if node in by_name:
        try:
            decl = by_name[node].event(event)
        except KeyError:
            raise CompositionError(f"machine {node!r} has no event {event!r}") from None
        if decl.direction != expected:
            raise CompositionError(
                f"{node}.{event} is declared {decl.direction!r}; connection needs {expected!r}"
            )
        return decl
    if platform is not None and node == platform.name:
        for e in platform.events:
            if e.name == event:
                return None  # payload checked against the machine side only
        raise CompositionError(f"platform has no event {event!r}")
    if node == (platform.name if platform else "platform"):
        return None
    raise CompositionError(f"unknown connection endpoint {node!r}")


def build_async_buffer(
    conn: Connection,
    sender: Machine | None,
    receiver: Machine,
    defs: dict,
    *,
    platform: PlatformDecl | None = None,
) -> tuple[str, ProcessTerm, frozenset[EventLabel]]:
    """One-slot overwrite buffer realising an asynchronous connection.

    The sender-side event is always accepted (an unconsumed value is simply
    replaced); the receiver side sees its own input event when a value is
    pending.
    """
    to_decl = receiver.event(conn.to_event).resolved(receiver.name)
    if sender is not None:
        from_decl = sender.event(conn.from_event).resolved(sender.name)
        put_channel, put_dir = from_decl.channel, from_decl.chan_direction
    else:
        put_channel, put_dir = f"{conn.from_node}.{conn.from_event}", None
    prefix = f"buffer.{conn.from_node}.{conn.from_event}->{conn.to_node}.{conn.to_event}"
    combos = list(_domains(to_decl.fields))
    puts = {c: EventLabel("visible", put_channel, put_dir, c) for c in combos}
    gets = {c: EventLabel("visible", to_decl.channel, to_decl.chan_direction, c) for c in combos}
    empty_name = f"{prefix}#empty"
    full_name = {c: f"{prefix}#full{'.'.join(map(str, c)) or '.'}" for c in combos}
    defs[empty_name] = external_choice(
        [Prefix(puts[c], NamedRef(full_name[c])) for c in combos]
    )
    for c in combos:
        branches: list[ProcessTerm] = [Prefix(puts[w], NamedRef(full_name[w])) for w in combos]
        branches.append(Prefix(gets[c], NamedRef(empty_name)))
        defs[full_name[c]] = external_choice(branches)
    alphabet = frozenset(puts.values()) | frozenset(gets.values())
    return prefix, NamedRef(empty_name), alphabet


@dataclass
class ComposedSystem:
    term: ProcessTerm
    alphabet: frozenset[EventLabel]
    parts: tuple[tuple[str, ProcessTerm, frozenset[EventLabel]], ...]


def explode_composition(
    parts: Sequence["Lts"],
    alphabets: Sequence[frozenset[EventLabel]],
    max_states: int = 10_000_000,
) -> "Lts":
    """Product exploration of already-exploded parts.

    Equivalent to exploding the folded parallel term (each visible event
    synchronises every part whose alphabet contains it; tock and tick
    synchronise everybody) but works on integer state tuples, which is much
    faster for large compositions.  States carry no terms.
    """
    from .errors import ExplorationLimitError
    from .events import TAU, TICK, TOCK
    from .semantics import Lts

    n = len(parts)
    participants: dict[EventLabel, tuple[int, ...]] = {}
    for i, alpha in enumerate(alphabets):
        for e in alpha:
            participants.setdefault(e, ())
            participants[e] += (i,)

    # per part, per state: event -> targets (visible), plus tau/tock/tick rows
    tables = []
    for lts in parts:
        rows = []
        for row in lts.edges:
            by_event: dict[EventLabel, list[int]] = {}
            for e, t in row:
                by_event.setdefault(e, []).append(t)
            rows.append(by_event)
        tables.append(rows)

    init = tuple(l.initial for l in parts)
    index: dict[tuple[int, ...], int] = {init: 0}
    order: list[tuple[int, ...]] = [init]
    edges: list[tuple[tuple[EventLabel, int], ...]] = []
    frontier = 0
    while frontier < len(order):
        current = order[frontier]
        frontier += 1
        moves: list[tuple[EventLabel, tuple[int, ...]]] = []
        enabled: dict[EventLabel, dict[int, list[int]]] = {}
        for i in range(n):
            row = tables[i][current[i]]
            for e, targets in row.items():
                if e.kind == "tau":
                    for t in targets:
                        moves.append((TAU, current[:i] + (t,) + current[i + 1 :]))
                else:
                    enabled.setdefault(e, {})[i] = targets
        for e, movers in enabled.items():
            if e.kind in ("tock", "tick"):
                needed: tuple[int, ...] = tuple(range(n))
            elif e in participants:
                needed = participants[e]
            else:
                # not declared anywhere: performers interleave
                for i, targets in movers.items():
                    for t in targets:
                        moves.append((e, current[:i] + (t,) + current[i + 1 :]))
                continue
            if any(i not in movers for i in needed):
                continue
            for picks in itertools.product(*[movers[i] for i in needed]):
                succ = list(current)
                for i, t in zip(needed, picks):
                    succ[i] = t
                moves.append((e, tuple(succ)))
        row_out: list[tuple[EventLabel, int]] = []
        for e, target in sorted(set(moves), key=lambda m: (m[0].sort_key(), m[1])):
            idx = index.get(target)
            if idx is None:
                if len(order) >= max_states:
                    raise ExplorationLimitError(max_states, len(order) - frontier)
                idx = len(order)
                index[target] = idx
                order.append(target)
            row_out.append((e, idx))
        edges.append(tuple(row_out))
    alphabet = frozenset().union(*alphabets) if alphabets else frozenset()
    return Lts(edges=tuple(edges), terms=(), alphabet=alphabet)


def compose_controller(
    parts: Sequence[tuple[str, ProcessTerm, frozenset[EventLabel]]],
    connections: Sequence[Connection] = (),
    machines: Mapping[str, Machine] | None = None,
    defs: dict | None = None,
    platform: PlatformDecl | None = None,
) -> ComposedSystem:
    """Parallel composition of wired parts, synchronised on shared labels.

    ``parts`` are ``(name, term, alphabet)`` triples whose channels were
    already unified by :func:`wire_machines`.  Asynchronous connections add
    one-slot overwrite buffers as extra parts.
    """
    machines = dict(machines or {})
    defs = defs if defs is not None else {}
    all_parts = list(parts)
    for c in connections:
        if not c.async_:
            continue
        receiver = machines.get(c.to_node)
        if receiver is None:
            raise CompositionError(f"async connection into unknown machine {c.to_node!r}")
        sender = machines.get(c.from_node)
        name, term, alphabet = build_async_buffer(c, sender, receiver, defs, platform=platform)
        all_parts.append((name, term, alphabet))
    if not all_parts:
        raise CompositionError("nothing to compose")
    name0, term, alphabet = all_parts[0]
    for _, nxt_term, nxt_alpha in all_parts[1:]:
        term = Parallel(term, frozenset(alphabet & nxt_alpha), nxt_term)
        alphabet = alphabet | nxt_alpha
    return ComposedSystem(term=term, alphabet=alphabet, parts=tuple(all_parts))


@dataclass
class AssembledSystem:
    """A wired, compiled and composed collection of machines."""

    machines: dict[str, Machine]
    compiled: dict[str, CompiledMachine]
    terms: dict[str, ProcessTerm]
    alphabets: dict[str, frozenset[EventLabel]]
    composed: ComposedSystem
    defs: dict[str, ProcessTerm]


def assemble_system(
    machines: Sequence[Machine],
    connections: Sequence[Connection],
    platform: PlatformDecl | None,
    enum_tables: Mapping[str, Mapping[str, int]],
    defs: dict | None = None,
) -> AssembledSystem:
    """Wire, compile (gates included) and compose a set of machines.

    The composition is registered under the name ``system`` next to the
    individual machines.
    """
    defs = defs if defs is not None else {}
    wired = wire_machines(machines, connections, platform)
    by_name = {m.name: m for m in wired}
    compiled: dict[str, CompiledMachine] = {}
    terms: dict[str, ProcessTerm] = {}
    alphabets: dict[str, frozenset[EventLabel]] = {}
    for m in wired:
        cm = compile_machine_full(m, defs=defs)
        compiled[m.name] = cm
        term, alphabet = attach_gates(cm, by_name, enum_tables, defs)
        terms[m.name] = term
        alphabets[m.name] = alphabet
    parts = [(m.name, terms[m.name], alphabets[m.name]) for m in wired]
    composed = compose_controller(parts, connections, by_name, defs, platform)
    terms["system"] = composed.term
    alphabets["system"] = composed.alphabet
    return AssembledSystem(
        machines=by_name,
        compiled=compiled,
        terms=terms,
        alphabets=alphabets,
        composed=composed,
        defs=defs,
    )


def explode_system(
    composed: ComposedSystem,
    defs: Mapping[str, ProcessTerm],
    max_states: int = 10_000_000,
    *,
    prioritised: bool = True,
) -> "Lts":
    """Explore a composition via the product engine and apply timed priority."""
    from .semantics import apply_timed_priority, explode

    parts = []
    alphabets = []
    for _name, term, alphabet in composed.parts:
        parts.append(explode(term, defs, alphabet, max_states))
        alphabets.append(alphabet)
    lts = explode_composition(parts, alphabets, max_states)
    return apply_timed_priority(lts) if prioritised else lts
