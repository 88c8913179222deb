"""Syntax tree of model files.

Type references stay symbolic here (range and record names resolve only
once a configuration picks the integer bounds); guard and action
expressions are already the shared expression trees from
:mod:`tockcheck.machine`.  Source spans never take part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..machine import (
    Connection,
    Junction,
    MachineState,
    MonitorDecl,
    SourceSpan,
    Transition,
)


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan | None
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        hint = ""
        if self.expected:
            hint = f" (expected {', '.join(self.expected)})"
        return f"{where}{self.message}{hint}"


@dataclass(frozen=True)
class RangeDecl:
    name: str
    lo: int
    hi: int
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EnumDecl:
    name: str
    members: tuple[str, ...]
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RawField:
    name: str
    type_ref: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RecordDecl:
    name: str
    fields: tuple[RawField, ...]
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RawEvent:
    name: str
    direction: str  # "in" | "out"
    type_ref: str | None = None
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RawOp:
    name: str
    param_refs: tuple[str, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RawConst:
    name: str
    value: int | None = None
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class RawVar:
    name: str
    type_ref: str
    initial: tuple[int, ...]
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class PlatformBlock:
    name: str = "platform"
    events: tuple[RawEvent, ...] = ()
    operations: tuple[RawOp, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class MachineDef:
    """A machine as written: behaviour resolved, types still symbolic."""

    name: str
    constants: tuple[RawConst, ...] = ()
    variables: tuple[RawVar, ...] = ()
    monitors: tuple[MonitorDecl, ...] = ()
    events: tuple[RawEvent, ...] = ()
    operations: tuple[RawOp, ...] = ()
    initial: str = ""
    states: tuple[MachineState, ...] = ()
    junctions: tuple[Junction, ...] = ()
    transitions: tuple[Transition, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ConnectionsBlock:
    connections: tuple[Connection, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ConfigDecl:
    name: str
    range_overrides: tuple[tuple[str, int, int], ...] = ()
    const_overrides: tuple[tuple[str, str, int], ...] = ()  # (machine, const, value)
    span: SourceSpan | None = field(default=None, compare=False)


Declaration = Union[
    RangeDecl, EnumDecl, RecordDecl, PlatformBlock, MachineDef, ConnectionsBlock, ConfigDecl
]


@dataclass(frozen=True)
class ModelFile:
    name: str
    declarations: tuple[Declaration, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)

    def _of(self, cls):
        return tuple(d for d in self.declarations if isinstance(d, cls))

    @property
    def ranges(self) -> tuple[RangeDecl, ...]:
        return self._of(RangeDecl)

    @property
    def enums(self) -> tuple[EnumDecl, ...]:
        return self._of(EnumDecl)

    @property
    def records(self) -> tuple[RecordDecl, ...]:
        return self._of(RecordDecl)

    @property
    def platform(self) -> PlatformBlock | None:
        blocks = self._of(PlatformBlock)
        return blocks[0] if blocks else None

    @property
    def machines(self) -> tuple[MachineDef, ...]:
        return self._of(MachineDef)

    @property
    def connections(self) -> tuple[Connection, ...]:
        out: tuple[Connection, ...] = ()
        for block in self._of(ConnectionsBlock):
            out += block.connections
        return out

    @property
    def configs(self) -> tuple[ConfigDecl, ...]:
        return self._of(ConfigDecl)

    def machine(self, name: str) -> MachineDef:
        for m in self.machines:
            if m.name == name:
                return m
        raise KeyError(name)
