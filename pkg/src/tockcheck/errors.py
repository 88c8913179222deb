"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TockcheckError(Exception):
    """Base class for all errors raised by tockcheck."""


class LinkageError(TockcheckError):
    """A named process reference cannot be resolved (or recursion is unguarded)."""

    def __init__(self, name: str, reason: str = "no definition"):
        self.name = name
        self.reason = reason
        super().__init__(f"process reference {name!r}: {reason}")


class ExplorationLimitError(TockcheckError):
    """State-space exploration exceeded the configured state cap."""

    def __init__(self, limit: int, frontier_size: int):
        self.limit = limit
        self.frontier_size = frontier_size
        super().__init__(
            f"exploration exceeded {limit} states (frontier size {frontier_size})"
        )


class CompileError(TockcheckError):
    """A state machine cannot be compiled (bad junction, range violation, ...)."""


class CompositionError(TockcheckError):
    """Machines cannot be composed as wired."""


class EvalError(TockcheckError):
    """An expression cannot be evaluated against a valuation."""


class ResourceError(TockcheckError):
    """A verification run exceeded its resource budget."""

    def __init__(self, message: str, states: int = 0, transitions: int = 0):
        self.states = states
        self.transitions = transitions
        super().__init__(message)


class ModelError(TockcheckError):
    """One or more diagnostics produced while parsing or validating a model file."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
