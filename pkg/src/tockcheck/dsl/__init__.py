"""Textual front-end: model files (.twmodel) and assertion files (.twassert)."""

from .ast import (
    ConfigDecl,
    ConnectionsBlock,
    Diagnostic,
    EnumDecl,
    MachineDef,
    ModelFile,
    PlatformBlock,
    RangeDecl,
    RawConst,
    RawEvent,
    RawOp,
    RawVar,
    RecordDecl,
)
from .assertions import parse_assertions
from .loader import LoadedModel, load_model, resolve_model
from .parser import parse_model
from .printer import roundtrip
