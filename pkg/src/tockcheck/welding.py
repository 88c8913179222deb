"""The IntelliWelder synchronisation corpus.

A welding cell: a UR cobot arm and a turntable external axis (EXAX) must
execute movement requests synchronously.  Five state machines cooperate: the
arm and turntable handlers, a system-phase tracker, a relay for the
out-of-sync signal, and a checker that forwards movement requests only while
the system phase allows them.  A movement request whose time budget is
already negative signals loss of synchronisation.

``build_system`` produces the machines, their compiled process terms, and
the synchronised composition for a given configuration; the same model ships
as a text file under ``corpus/intelliwelder`` for the parser front-end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .checker import Assertion, call_deadline_spec, constrain_skip
from .compiler import (
    CompiledMachine,
    ComposedSystem,
    PlatformDecl,
    assemble_system,
)
from .compiler import explode_system as explode_composed
from .events import EventLabel, instances_of
from .machine import (
    Assign,
    Binary,
    BoolLit,
    Call,
    Connection,
    ConstDecl,
    Emit,
    EnumLit,
    EventDecl,
    FieldDecl,
    IntLit,
    Junction,
    Machine,
    MachineState,
    MonitorDecl,
    OpDecl,
    Transition,
    Trigger,
    Unary,
    Var,
    VarDecl,
    bool_var,
    int_var,
)
from .semantics import Lts
from .terms import STOP, Hide, ProcessTerm

SYS_STATE_MEMBERS = ("wait_for_start", "working", "UR_finished", "EXAX_finished", "final")
SYS_STATE = {name: i for i, name in enumerate(SYS_STATE_MEMBERS)}

DIST_LO, DIST_HI = -1, 1


@dataclass(frozen=True)
class WeldingConfig:
    """Model parameters; the two interesting time ranges are (0, 2) and (-1, 1)."""

    core_int: tuple[int, int] = (0, 2)
    n_waypoints_ur: int = 3
    n_waypoints_exax: int = 1
    big_dist_threshold: int = 1

    def __post_init__(self):
        lo, hi = self.core_int
        if lo > hi:
            raise ValueError(f"empty time range [{lo}..{hi}]")
        if self.n_waypoints_ur < 0 or self.n_waypoints_exax < 0:
            raise ValueError("waypoint counts must be natural numbers")
        if self.n_waypoints_ur > 15 or self.n_waypoints_exax > 15:
            raise ValueError("waypoint counters wider than the variable range bound")


def _core_field(name: str, cfg: WeldingConfig) -> FieldDecl:
    return FieldDecl(name, cfg.core_int[0], cfg.core_int[1], "core_int")


def _dist_field(name: str) -> FieldDecl:
    return FieldDecl(name, DIST_LO, DIST_HI, "dist")


def _bool_field(name: str) -> FieldDecl:
    return FieldDecl(name, 0, 1, "bool")


def exax_move_fields(cfg: WeldingConfig) -> tuple[FieldDecl, ...]:
    return (_dist_field("dist"), _core_field("time", cfg))


def ur_move_fields(cfg: WeldingConfig) -> tuple[FieldDecl, ...]:
    return (
        _bool_field("blending"),
        _bool_field("large_offset"),
        _bool_field("sharp_corner"),
        _dist_field("dist1"),
        _dist_field("dist2"),
        _core_field("time", cfg),
    )


def check_big_dist(d1: int, d2: int, threshold: int) -> bool:
    """Is either joint distance strictly beyond the threshold?"""
    return abs(d1) > threshold or abs(d2) > threshold


# --------------------------------------------------------------------------
# Machine definitions

def system_machine() -> Machine:
    def ev(name: str) -> EventDecl:
        return EventDecl(name, "in")

    states = tuple(
        MachineState(n) for n in ("wait_for_start", "working", "UR_finished", "EXAX_finished")
    ) + (MachineState("halted", final=True),)
    transitions = (
        Transition("wait_for_start", "working", Trigger("start_system")),
        Transition("working", "UR_finished", Trigger("UR_done")),
        Transition("working", "EXAX_finished", Trigger("EXAX_done")),
        Transition("UR_finished", "wait_for_start", Trigger("EXAX_done")),
        Transition("EXAX_finished", "wait_for_start", Trigger("UR_done")),
        Transition("working", "halted", Trigger("out_of_sync")),
        Transition("UR_finished", "halted", Trigger("out_of_sync")),
        Transition("EXAX_finished", "halted", Trigger("out_of_sync")),
    )
    return Machine(
        name="System",
        events=(ev("start_system"), ev("UR_done"), ev("EXAX_done"), ev("out_of_sync")),
        states=states,
        initial="wait_for_start",
        transitions=transitions,
    )


def exax_machine(cfg: WeldingConfig) -> Machine:
    move_fields = exax_move_fields(cfg)
    store = tuple(Assign(f"exax_move.{f.name}", Var(f"m.{f.name}")) for f in move_fields)
    # the stored command is dead once the call is placed; clearing it right
    # away keeps the explored state space small
    reset = tuple(Assign(f"exax_move.{f.name}", IntLit(0)) for f in move_fields)
    time_neg = Binary("<", Var("exax_move.time"), IntLit(0))
    time_ok = Binary(">=", Var("exax_move.time"), IntLit(0))
    at_last = Binary(">=", Var("curr_waypoint"), Var("n_waypoints"))
    more_left = Binary("<", Var("curr_waypoint"), Var("n_waypoints"))
    return Machine(
        name="EXAX",
        constants=(ConstDecl("n_waypoints", cfg.n_waypoints_exax),),
        variables=(
            int_var("curr_waypoint", 0, max(cfg.n_waypoints_exax, 1), 0, "waypoints_exax"),
            VarDecl("exax_move", "EXAXMoveCmd", move_fields, (0, 0)),
        ),
        events=(
            EventDecl("move", "in", move_fields, "EXAXMoveCmd"),
            EventDecl("out_of_sync", "out"),
            EventDecl("done", "out"),
        ),
        operations=(OpDecl("go_to_pos", (_dist_field(""), _core_field("", cfg))),),
        states=(
            MachineState("wait_for_move"),
            MachineState(
                "by_position",
                entry=(Call("go_to_pos", (Var("exax_move.dist"), Var("exax_move.time"))),) + reset,
            ),
            MachineState("halted", final=True),
        ),
        junctions=(Junction("check_time"), Junction("next_waypoint")),
        initial="wait_for_move",
        transitions=(
            Transition("wait_for_move", "check_time", Trigger("move", "m"), actions=store),
            Transition("check_time", "halted", guard=time_neg, actions=(Emit("out_of_sync"),)),
            Transition("check_time", "by_position", guard=time_ok),
            Transition("by_position", "next_waypoint"),
            Transition(
                "next_waypoint", "wait_for_move", guard=at_last,
                actions=(Assign("curr_waypoint", IntLit(0)), Emit("done")),
            ),
            Transition(
                "next_waypoint", "wait_for_move", guard=more_left,
                actions=(Assign("curr_waypoint", Binary("+", Var("curr_waypoint"), IntLit(1))),),
            ),
        ),
    )


def ur_machine(cfg: WeldingConfig) -> Machine:
    move_fields = ur_move_fields(cfg)
    store = tuple(Assign(f"ur_move.{f.name}", Var(f"m.{f.name}")) for f in move_fields)
    # dead once the command is chosen; cleared with the call (state-space hygiene)
    reset = tuple(
        Assign(f"ur_move.{f.name}", BoolLit(False) if f.type_name == "bool" else IntLit(0))
        for f in move_fields
    ) + (Assign("big_dist", BoolLit(False)),)
    move_args = (Var("ur_move.dist1"), Var("ur_move.dist2"), Var("ur_move.time"))
    op_params = (_dist_field(""), _dist_field(""), _core_field("", cfg))

    blending = Var("ur_move.blending")
    large = Var("ur_move.large_offset")
    sharp = Var("ur_move.sharp_corner")
    big_check = Binary(
        "or",
        Binary(">", Unary("abs", Var("ur_move.dist1")), Var("big_dist_threshold")),
        Binary(">", Unary("abs", Var("ur_move.dist2")), Var("big_dist_threshold")),
    )

    def move_state(name: str, op: str) -> MachineState:
        return MachineState(
            name,
            entry=(Call(op, move_args),) + reset,
            exit=(Assign("choosing", BoolLit(False)),),
        )

    return Machine(
        name="UR",
        constants=(
            ConstDecl("n_waypoints", cfg.n_waypoints_ur),
            ConstDecl("big_dist_threshold", cfg.big_dist_threshold),
        ),
        variables=(
            int_var("curr_waypoint", 0, max(cfg.n_waypoints_ur, 1), 0, "waypoints_ur"),
            VarDecl("ur_move", "URMoveCmd", move_fields, (0, 0, 0, 0, 0, 0)),
            bool_var("choosing"),
            bool_var("big_dist"),
        ),
        events=(
            EventDecl("move", "in", move_fields, "URMoveCmd"),
            EventDecl("out_of_sync", "out"),
            EventDecl("done", "out"),
        ),
        operations=(
            OpDecl("moveJ", op_params),
            OpDecl("moveP", op_params),
            OpDecl("moveL", op_params),
            OpDecl("moveL_with_t", op_params),
        ),
        states=(
            MachineState("wait_for_move"),
            MachineState("choose_cmd", entry=(Assign("choosing", BoolLit(True)),)),
            move_state("moveJ_cmd", "moveJ"),
            move_state("moveP_cmd", "moveP"),
            move_state("moveL_cmd", "moveL"),
            move_state("moveL_with_t_cmd", "moveL_with_t"),
            MachineState("big_dist_check", entry=(Assign("big_dist", big_check),)),
            MachineState("halted", final=True),
        ),
        junctions=(Junction("check_time"), Junction("choice_made"), Junction("next_waypoint")),
        initial="wait_for_move",
        transitions=(
            Transition("wait_for_move", "check_time", Trigger("move", "m"), actions=store),
            Transition(
                "check_time", "halted",
                guard=Binary("<", Var("ur_move.time"), IntLit(0)),
                actions=(Emit("out_of_sync"),),
            ),
            Transition("check_time", "choose_cmd", guard=Binary(">=", Var("ur_move.time"), IntLit(0))),
            Transition("choose_cmd", "moveJ_cmd", guard=Binary("and", blending, Unary("not", large))),
            Transition(
                "choose_cmd", "moveP_cmd",
                guard=Binary("and", Binary("and", blending, large), Unary("not", sharp)),
            ),
            Transition(
                "choose_cmd", "moveL_with_t_cmd",
                guard=Binary("and", Binary("and", blending, large), sharp),
            ),
            Transition("choose_cmd", "big_dist_check", guard=Unary("not", blending)),
            Transition("big_dist_check", "moveL_cmd", guard=Var("big_dist")),
            Transition("big_dist_check", "moveL_with_t_cmd", guard=Unary("not", Var("big_dist"))),
            Transition("moveJ_cmd", "choice_made"),
            Transition("moveP_cmd", "choice_made"),
            Transition("moveL_cmd", "choice_made"),
            Transition("moveL_with_t_cmd", "choice_made"),
            Transition("choice_made", "next_waypoint", guard=Unary("not", Var("choosing"))),
            Transition(
                "next_waypoint", "wait_for_move",
                guard=Binary(">=", Var("curr_waypoint"), Var("n_waypoints")),
                actions=(Assign("curr_waypoint", IntLit(0)), Emit("done")),
            ),
            Transition(
                "next_waypoint", "wait_for_move",
                guard=Binary("<", Var("curr_waypoint"), Var("n_waypoints")),
                actions=(Assign("curr_waypoint", Binary("+", Var("curr_waypoint"), IntLit(1))),),
            ),
        ),
    )


def relay_machine() -> Machine:
    return Machine(
        name="relay",
        events=(
            EventDecl("exax_oos", "in"),
            EventDecl("ur_oos", "in"),
            EventDecl("out_of_sync", "out"),
        ),
        states=(MachineState("relaying"),),
        initial="relaying",
        transitions=(
            Transition("relaying", "relaying", Trigger("exax_oos"), actions=(Emit("out_of_sync"),)),
            Transition("relaying", "relaying", Trigger("ur_oos"), actions=(Emit("out_of_sync"),)),
        ),
    )


def state_check_machine(cfg: WeldingConfig) -> Machine:
    """Single-state checker with two guarded self-transitions.

    Movement requests pass to the robots only in the right system phases.
    The checker's accept-transitions are wired onto the robots' own move
    wires, so acceptance, forwarding and delivery are one synchronisation;
    the phase guards are monitor guards over the System machine's progress.
    """
    urf = ur_move_fields(cfg)
    exf = exax_move_fields(cfg)

    def member(name: str) -> EnumLit:
        return EnumLit("SysState", name, SYS_STATE[name])

    ur_ok = Binary(
        "or",
        Binary("==", Var("sys_state"), member("working")),
        Binary("==", Var("sys_state"), member("EXAX_finished")),
    )
    exax_ok = Binary(
        "or",
        Binary("==", Var("sys_state"), member("working")),
        Binary("==", Var("sys_state"), member("UR_finished")),
    )
    return Machine(
        name="state_check",
        monitors=(MonitorDecl("sys_state", "SysState", "wait_for_start", "System"),),
        events=(
            EventDecl("ur_move_in", "in", urf, "URMoveCmd"),
            EventDecl("exax_move_in", "in", exf, "EXAXMoveCmd"),
        ),
        states=(MachineState("checker"),),
        initial="checker",
        transitions=(
            Transition("checker", "checker", Trigger("ur_move_in", "m"), monitor_guard=ur_ok),
            Transition("checker", "checker", Trigger("exax_move_in", "m"), monitor_guard=exax_ok),
        ),
    )


def platform_interface(cfg: WeldingConfig) -> PlatformDecl:
    dist2core = (_dist_field(""), _dist_field(""), _core_field("", cfg))
    return PlatformDecl(
        name="platform",
        events=(
            EventDecl("start_system", "out"),
            EventDecl("next_UR_move", "out", ur_move_fields(cfg), "URMoveCmd"),
            EventDecl("next_EXAX_move", "out", exax_move_fields(cfg), "EXAXMoveCmd"),
        ),
        operations=(
            OpDecl("go_to_pos", (_dist_field(""), _core_field("", cfg))),
            OpDecl("moveJ", dist2core),
            OpDecl("moveP", dist2core),
            OpDecl("moveL", dist2core),
            OpDecl("moveL_with_t", dist2core),
        ),
    )


def corpus_connections() -> tuple[Connection, ...]:
    # each movement request feeds both the checker and the robot on one
    # shared wire; the checker's guard thereby gates delivery itself
    return (
        Connection("platform", "start_system", "System", "start_system"),
        Connection("platform", "next_UR_move", "UR", "move"),
        Connection("platform", "next_UR_move", "state_check", "ur_move_in", wire="UR.move"),
        Connection("platform", "next_EXAX_move", "EXAX", "move"),
        Connection("platform", "next_EXAX_move", "state_check", "exax_move_in", wire="EXAX.move"),
        Connection("EXAX", "out_of_sync", "relay", "exax_oos", wire="EXAX.out_of_sync"),
        Connection("UR", "out_of_sync", "relay", "ur_oos", wire="UR.out_of_sync"),
        Connection("relay", "out_of_sync", "System", "out_of_sync"),
        Connection("EXAX", "done", "System", "EXAX_done", wire="EXAX.done"),
        Connection("UR", "done", "System", "UR_done", wire="UR.done"),
    )


# --------------------------------------------------------------------------
# System assembly

@dataclass
class WeldingSystem:
    config: WeldingConfig
    defs: dict[str, ProcessTerm]
    machines: dict[str, Machine]
    compiled: dict[str, CompiledMachine]
    terms: dict[str, ProcessTerm]
    alphabets: dict[str, frozenset[EventLabel]]
    composed: ComposedSystem
    platform: PlatformDecl
    connections: tuple[Connection, ...] = ()
    enums: dict[str, dict[str, int]] = field(default_factory=dict)

    def alphabet_of(self, name: str) -> frozenset[EventLabel]:
        return self.alphabets[name]

    def instances(self, name: str, channel: str) -> frozenset[EventLabel]:
        return instances_of(self.alphabets[name], channel)

    def unreachable_states(self) -> dict[str, tuple[str, ...]]:
        out = {}
        for name, cm in self.compiled.items():
            missing = cm.unreachable_state_names()
            if missing:
                out[name] = missing
        return out


MACHINE_ORDER = ("System", "state_check", "relay", "EXAX", "UR")


def corpus_machines(cfg: WeldingConfig) -> list[Machine]:
    return [
        system_machine(),
        state_check_machine(cfg),
        relay_machine(),
        exax_machine(cfg),
        ur_machine(cfg),
    ]


def build_system(cfg: WeldingConfig | None = None) -> WeldingSystem:
    """Compile the five machines and their synchronised composition.

    The returned system carries each machine individually (assertions run on
    the sub-terms) plus the full composition under the name ``system``.
    """
    cfg = cfg or WeldingConfig()
    platform = platform_interface(cfg)
    connections = corpus_connections()
    enums = {"SysState": dict(SYS_STATE)}
    assembled = assemble_system(corpus_machines(cfg), connections, platform, enums)
    return WeldingSystem(
        config=cfg,
        defs=assembled.defs,
        machines=assembled.machines,
        compiled=assembled.compiled,
        terms=assembled.terms,
        alphabets=assembled.alphabets,
        composed=assembled.composed,
        platform=platform,
        connections=connections,
        enums=enums,
    )


def explode_system(ws: WeldingSystem, max_states: int = 10_000_000, *, prioritised: bool = True) -> Lts:
    """Explore the full composition via the product engine."""
    return explode_composed(ws.composed, ws.defs, max_states, prioritised=prioritised)


# --------------------------------------------------------------------------
# The assertion suite

UR_CALL_CHANNELS = ("UR.moveJCall", "UR.movePCall", "UR.moveLCall", "UR.moveL_with_tCall")


def build_spec_a1(ws: WeldingSystem) -> ProcessTerm:
    """After each movement request, the turntable call must be immediate."""
    alphabet = ws.alphabet_of("EXAX")
    return call_deadline_spec(
        alphabet,
        instances_of(alphabet, "EXAX.move"),
        instances_of(alphabet, "EXAX.go_to_posCall"),
        ws.defs,
        name="SpecA1",
    )


def build_spec_a3(ws: WeldingSystem) -> ProcessTerm:
    """After each movement request, one of the arm's move calls must be immediate."""
    alphabet = ws.alphabet_of("UR")
    required = frozenset().union(*[instances_of(alphabet, c) for c in UR_CALL_CHANNELS])
    return call_deadline_spec(
        alphabet, instances_of(alphabet, "UR.move"), required, ws.defs, name="SpecA3"
    )


def standard_assertions(ws: WeldingSystem) -> list[Assertion]:
    """The seven-assertion suite over the welding model."""
    exax_calls = ws.instances("EXAX", "EXAX.go_to_posCall")
    ur_calls = frozenset().union(*[ws.instances("UR", c) for c in UR_CALL_CHANNELS])
    sys_constrained = constrain_skip(
        ws.terms["System"], ws.instances("System", "System.out_of_sync")
    )
    sys_terminates = Hide(sys_constrained, ws.alphabet_of("System"))
    return [
        Assertion("A1", "traces_refinement", ws.terms["EXAX"], spec=build_spec_a1(ws), timed=True),
        Assertion("A2", "timelock_free", ws.terms["EXAX"], hide=exax_calls),
        Assertion("A3", "traces_refinement", ws.terms["UR"], spec=build_spec_a3(ws), timed=True),
        Assertion("A4", "timelock_free", ws.terms["UR"], hide=ur_calls),
        Assertion("A5", "does_not_terminate", ws.terms["EXAX"]),
        Assertion("A6", "does_not_terminate", ws.terms["UR"]),
        Assertion("A7", "traces_refinement", sys_terminates, spec=STOP),
    ]


# --------------------------------------------------------------------------
# Structural requirement checks over explored systems

def out_of_sync_reachable(lts: Lts) -> bool:
    """Loss of synchronisation is detectable: some out_of_sync event is reachable."""
    for row in lts.edges:
        for e, _ in row:
            if e.is_visible and e.name.endswith("out_of_sync"):
                return True
    return False


def moves_answered_before_tock(lts: Lts, move_events, call_events) -> bool:
    """After any of ``move_events``, some call in ``call_events`` occurs on
    every path before the next tock."""
    move_events = frozenset(move_events)
    call_events = frozenset(call_events)
    n = lts.n_states
    # states from which a tock can happen before any call
    bad = [any(e.kind == "tock" for e, _ in row) for row in lts.edges]
    reverse: list[list[int]] = [[] for _ in range(n)]
    for s, row in enumerate(lts.edges):
        for e, t in row:
            if e.kind != "tock" and e not in call_events:
                reverse[t].append(s)
    work = [s for s in range(n) if bad[s]]
    while work:
        t = work.pop()
        for s in reverse[t]:
            if not bad[s]:
                bad[s] = True
                work.append(s)
    for row in lts.edges:
        for e, t in row:
            if e in move_events and bad[t]:
                return False
    return True


def calls_gated_by(lts: Lts, gate_events, call_events) -> bool:
    """No call in ``call_events`` is reachable without passing a gate event."""
    gate_events = frozenset(gate_events)
    call_events = frozenset(call_events)
    seen = {lts.initial}
    work = [lts.initial]
    while work:
        s = work.pop()
        for e, t in lts.edges[s]:
            if e in call_events:
                return False
            if e in gate_events:
                continue
            if t not in seen:
                seen.add(t)
                work.append(t)
    return True


def no_calls_between_done_and_restart(lts: Lts, done_events, restart_events, call_events) -> bool:
    """Once a machine reports done, its calls stay disabled until a restart."""
    done_events = frozenset(done_events)
    restart_events = frozenset(restart_events)
    call_events = frozenset(call_events)
    starts = {t for row in lts.edges for e, t in row if e in done_events}
    seen = set(starts)
    work = list(starts)
    while work:
        s = work.pop()
        for e, t in lts.edges[s]:
            if e in call_events:
                return False
            if e in restart_events:
                continue
            if t not in seen:
                seen.add(t)
                work.append(t)
    return True


def calls_per_cycle(lts: Lts, call_events, done_events) -> frozenset[int]:
    """Possible call counts between consecutive done events (and before the
    first).  A well-behaved waypoint loop yields exactly one count."""
    call_events = frozenset(call_events)
    done_events = frozenset(done_events)
    counts: dict[int, set[int]] = {lts.initial: {0}}
    work = [lts.initial]
    observed: set[int] = set()
    while work:
        s = work.pop()
        for e, t in lts.edges[s]:
            if e in done_events:
                observed.update(counts[s])
                new = {0}
            elif e in call_events:
                new = {c + 1 for c in counts[s]}
            else:
                new = set(counts[s])
            if not new <= counts.get(t, set()):
                counts.setdefault(t, set()).update(new)
                work.append(t)
    return frozenset(observed)
