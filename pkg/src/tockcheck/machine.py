"""State-machine data model and the guard/action expression language.

These types are shared by the textual front-end (which attaches source
spans) and the programmatic model builders (which leave spans empty); spans
never take part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

from .errors import EvalError

Value = Union[int, bool]


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int      # 1-based
    column: int    # 1-based
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


# --------------------------------------------------------------------------
# Expressions

@dataclass(frozen=True)
class IntLit:
    value: int
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EnumLit:
    enum: str
    member: str
    value: int
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    """A variable, constant or bound payload field; dotted names reach fields."""

    name: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" | "abs" | "not"
    operand: "Expr"
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # + - == != < <= > >= and or
    left: "Expr"
    right: "Expr"
    span: SourceSpan | None = field(default=None, compare=False)


Expr = Union[IntLit, BoolLit, EnumLit, Var, Unary, Binary]

_COMPARISONS = {"==", "!=", "<", "<=", ">", ">="}
_ARITH = {"+", "-"}
_BOOLOPS = {"and", "or"}


def eval_expr(expr: Expr, valuation: Mapping[str, Value]) -> Value:
    """Evaluate a guard or action expression against a valuation.

    Total on well-typed, fully bound input; raises :class:`EvalError`
    otherwise.
    """
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, EnumLit):
        return expr.value
    if isinstance(expr, Var):
        try:
            return valuation[expr.name]
        except KeyError:
            raise EvalError(f"unbound identifier {expr.name!r}") from None
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, valuation)
        if expr.op == "not":
            return not _as_bool(v, expr.op)
        n = _as_int(v, expr.op)
        return -n if expr.op == "neg" else abs(n)
    if isinstance(expr, Binary):
        if expr.op in _BOOLOPS:
            left = _as_bool(eval_expr(expr.left, valuation), expr.op)
            if expr.op == "and":
                return left and _as_bool(eval_expr(expr.right, valuation), expr.op)
            return left or _as_bool(eval_expr(expr.right, valuation), expr.op)
        lv = eval_expr(expr.left, valuation)
        rv = eval_expr(expr.right, valuation)
        if expr.op == "+":
            return _as_int(lv, expr.op) + _as_int(rv, expr.op)
        if expr.op == "-":
            return _as_int(lv, expr.op) - _as_int(rv, expr.op)
        if expr.op in _COMPARISONS:
            return _compare(expr.op, lv, rv)
    raise EvalError(f"cannot evaluate {expr!r}")


def _compare(op: str, lv: Value, rv: Value) -> bool:
    li, ri = int(lv), int(rv)
    if op == "==":
        return li == ri
    if op == "!=":
        return li != ri
    if op == "<":
        return li < ri
    if op == "<=":
        return li <= ri
    if op == ">":
        return li > ri
    return li >= ri


def _as_int(v: Value, op: str) -> int:
    if isinstance(v, bool):
        raise EvalError(f"operator {op!r} needs an integer, got a boolean")
    return v


def _as_bool(v: Value, op: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"operator {op!r} needs a boolean, got {v!r}")
    return v


def expr_refs(expr: Expr) -> frozenset[str]:
    """Names referenced by an expression (dotted field accesses included)."""
    if isinstance(expr, Var):
        return frozenset({expr.name})
    if isinstance(expr, Unary):
        return expr_refs(expr.operand)
    if isinstance(expr, Binary):
        return expr_refs(expr.left) | expr_refs(expr.right)
    return frozenset()


_PRECEDENCE = {"or": 1, "and": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
               "+": 4, "-": 4}


def render_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, EnumLit):
        return expr.member
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == "abs":
            return f"abs({render_expr(expr.operand)})"
        if expr.op == "neg":
            inner = render_expr(expr.operand, 5)
            return f"-{inner}"
        return f"not {render_expr(expr.operand, 5)}"
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        text = f"{render_expr(expr.left, prec)} {expr.op} {render_expr(expr.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"not an expression: {expr!r}")


# --------------------------------------------------------------------------
# Machine structure

@dataclass(frozen=True)
class FieldDecl:
    """One integer-valued slot with resolved inclusive bounds.

    ``type_name`` keeps the surface type ("bool", a range name, an enum
    name, or "lo..hi") so models can be printed back faithfully.
    """

    name: str
    lo: int
    hi: int
    type_name: str

    def contains(self, v: int) -> bool:
        return self.lo <= int(v) <= self.hi

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def domain(self) -> range:
        return range(self.lo, self.hi + 1)


@dataclass(frozen=True)
class ConstDecl:
    name: str
    value: int | None = None  # None: bound later via compile bindings
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class VarDecl:
    """A machine variable; record-typed variables carry one field per slot."""

    name: str
    type_name: str
    fields: tuple[FieldDecl, ...]
    initial: tuple[int, ...]
    span: SourceSpan | None = field(default=None, compare=False)

    def slot_names(self) -> tuple[str, ...]:
        if len(self.fields) == 1 and not self.fields[0].name:
            return (self.name,)
        return tuple(f"{self.name}.{f.name}" for f in self.fields)


def int_var(name: str, lo: int, hi: int, initial: int, type_name: str | None = None) -> VarDecl:
    tn = type_name or f"{lo}..{hi}"
    return VarDecl(name, tn, (FieldDecl("", lo, hi, tn),), (initial,))


def bool_var(name: str, initial: bool = False) -> VarDecl:
    return VarDecl(name, "bool", (FieldDecl("", 0, 1, "bool"),), (1 if initial else 0,))


@dataclass(frozen=True)
class EventDecl:
    """A typed event of one machine.

    ``channel``/``chan_direction`` name the transition-system label the event
    uses; connection wiring may redirect them so that two connected endpoints
    share one label.
    """

    name: str
    direction: str  # "in" | "out"
    fields: tuple[FieldDecl, ...] = ()
    type_name: str | None = None
    channel: str = ""
    chan_direction: str | None = "unset"
    span: SourceSpan | None = field(default=None, compare=False)

    def resolved(self, machine: str) -> "EventDecl":
        channel = self.channel or f"{machine}.{self.name}"
        chan_dir = self.direction if self.chan_direction == "unset" else self.chan_direction
        return EventDecl(self.name, self.direction, self.fields, self.type_name,
                         channel, chan_dir, self.span)


@dataclass(frozen=True)
class OpDecl:
    """A platform operation; calling it shows up as a ``<name>Call`` event."""

    name: str
    params: tuple[FieldDecl, ...] = ()
    channel: str = ""
    span: SourceSpan | None = field(default=None, compare=False)

    def resolved(self, machine: str) -> "OpDecl":
        channel = self.channel or f"{machine}.{self.name}Call"
        return OpDecl(self.name, self.params, channel, self.span)


@dataclass(frozen=True)
class Assign:
    target: str  # flattened slot name
    expr: Expr
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Emit:
    event: str
    args: tuple[Expr, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    op: str
    args: tuple[Expr, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)


Action = Union[Assign, Emit, Call]


@dataclass(frozen=True)
class MachineState:
    name: str
    entry: tuple[Action, ...] = ()
    exit: tuple[Action, ...] = ()
    final: bool = False
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Junction:
    name: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Trigger:
    event: str
    binder: str | None = None


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    trigger: Trigger | None = None
    guard: Expr | None = None
    actions: tuple[Action, ...] = ()
    # Guard over monitor variables; enforced by a synchronisation gate at
    # composition time rather than by the machine itself.
    monitor_guard: Expr | None = None
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class MonitorDecl:
    """A read-only view of another machine's progress.

    The monitor takes the tracked machine's state name as its value whenever
    that name is a member of the enum type, and keeps its previous value
    otherwise.  Guards over monitors are evaluated atomically with the
    trigger by a gate process built during composition.
    """

    name: str
    enum_type: str
    initial_member: str
    tracks: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Machine:
    name: str
    constants: tuple[ConstDecl, ...] = ()
    variables: tuple[VarDecl, ...] = ()
    monitors: tuple[MonitorDecl, ...] = ()
    events: tuple[EventDecl, ...] = ()
    operations: tuple[OpDecl, ...] = ()
    states: tuple[MachineState, ...] = ()
    junctions: tuple[Junction, ...] = ()
    initial: str = ""
    transitions: tuple[Transition, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)

    def state(self, name: str) -> MachineState:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)

    def event(self, name: str) -> EventDecl:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    def operation(self, name: str) -> OpDecl:
        for o in self.operations:
            if o.name == name:
                return o
        raise KeyError(name)

    def node_kind(self, name: str) -> str:
        if any(s.name == name for s in self.states):
            return "state"
        if any(j.name == name for j in self.junctions):
            return "junction"
        raise KeyError(name)

    def outgoing(self, node: str) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.source == node)


@dataclass(frozen=True)
class Connection:
    """A wire between two machine events (or from the open platform).

    Synchronous wires make both endpoints share one label; asynchronous
    wires interpose a one-slot overwrite buffer.  ``wire``/``wire_direction``
    override the shared label (default: the receiving endpoint's label).
    """

    from_node: str
    from_event: str
    to_node: str
    to_event: str
    async_: bool = False
    wire: str | None = None
    wire_direction: str | None = "unset"
    span: SourceSpan | None = field(default=None, compare=False)
