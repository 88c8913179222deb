"""Event labels of the timed transition systems.

Three labels are special: ``tau`` (internal), ``tock`` (one unit of discrete
time) and ``tick`` (successful termination).  Everything else is a visible
event on a dotted channel name, optionally tagged with a direction and a
tuple of integer payload values, rendered FDR-style as
``EXAX.move.in.0.-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

_KINDS = ("visible", "tau", "tock", "tick")
_KIND_RANK = {"visible": 0, "tau": 1, "tock": 2, "tick": 3}
_DIR_RANK = {None: 0, "in": 1, "out": 2}


@dataclass(frozen=True, eq=True)
class EventLabel:
    kind: str
    name: str = ""
    direction: str | None = None
    values: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "visible":
            if not self.name:
                raise ValueError("visible events need a non-empty channel name")
            if self.direction not in (None, "in", "out"):
                raise ValueError(f"bad direction {self.direction!r}")
        else:
            if self.name or self.direction is not None or self.values:
                raise ValueError(f"{self.kind} events carry no name or payload")
        object.__setattr__(
            self, "_hash", hash((self.kind, self.name, self.direction, self.values))
        )
        object.__setattr__(
            self, "_key", (_KIND_RANK[self.kind], self.name, _DIR_RANK[self.direction], self.values)
        )

    def __hash__(self):
        return self._hash  # type: ignore[attr-defined]

    @property
    def is_visible(self) -> bool:
        return self.kind == "visible"

    def sort_key(self):
        return self._key  # type: ignore[attr-defined]

    def __str__(self) -> str:
        if self.kind != "visible":
            return self.kind
        parts = [self.name]
        if self.direction is not None:
            parts.append(self.direction)
        parts.extend(str(v) for v in self.values)
        return ".".join(parts)


TAU = EventLabel("tau")
TOCK = EventLabel("tock")
TICK = EventLabel("tick")


def vis(name: str, *values: int, direction: str | None = None) -> EventLabel:
    """Shorthand for a visible event label."""
    return EventLabel("visible", name, direction, tuple(int(v) for v in values))


def sorted_events(events) -> tuple[EventLabel, ...]:
    return tuple(sorted(events, key=EventLabel.sort_key))


def make_alphabet(events) -> frozenset[EventLabel]:
    """A finite set of visible events; rejects tau/tock/tick members."""
    alphabet = frozenset(events)
    for e in alphabet:
        if not e.is_visible:
            raise ValueError(f"alphabet may only contain visible events, got {e}")
    return alphabet


def instances_of(alphabet, channel: str, direction: str | None = "any") -> frozenset[EventLabel]:
    """All events in ``alphabet`` on the given channel (any payload).

    ``direction="any"`` matches regardless of the direction tag.
    """
    picked = {
        e
        for e in alphabet
        if e.name == channel and (direction == "any" or e.direction == direction)
    }
    return frozenset(picked)
