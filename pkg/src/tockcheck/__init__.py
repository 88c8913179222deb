"""tockcheck: a discrete-time process-algebra model checker.

Processes are built from a small timed algebra (or compiled from
hierarchical state machines), explored into labelled transition systems,
and checked for traces refinement, timelock-freedom and non-termination.
Ships with the IntelliWelder welding-synchronisation corpus and its
seven-assertion suite.
"""

from .checker import (
    Assertion,
    CheckStats,
    Verdict,
    call_deadline_spec,
    constrain_skip,
    does_not_terminate,
    run_assertion,
    timelock_free,
    traces_refines,
)
from .compiler import (
    CompiledMachine,
    compile_machine,
    compile_machine_full,
    compose_controller,
    wire_machines,
)
from .errors import (
    CompileError,
    CompositionError,
    EvalError,
    ExplorationLimitError,
    LinkageError,
    ModelError,
    ResourceError,
    TockcheckError,
)
from .events import TAU, TICK, TOCK, EventLabel, make_alphabet, vis
from .machine import Machine, SourceSpan, eval_expr
from .semantics import Lts, apply_timed_priority, explode, prepare, step
from .terms import (
    OMEGA,
    SKIP,
    STOP,
    TOCKRUN,
    Chaos,
    Deadline,
    Exception_,
    ExternalChoice,
    Hide,
    InternalChoice,
    NamedRef,
    Parallel,
    Prefix,
    ProcessTerm,
    Sequential,
    external_choice,
    internal_choice,
)
from .welding import WeldingConfig, WeldingSystem, build_system, check_big_dist, standard_assertions

__version__ = "0.1.0"
