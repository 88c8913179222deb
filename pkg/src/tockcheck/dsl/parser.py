"""Recursive-descent parser for model files.

Errors do not abort the parse: the parser records a diagnostic with the
offending span and the expected tokens, skips to the next declaration
keyword at the same nesting depth, and carries on, so one run reports
several problems.  ``parse_model`` raises :class:`ModelError` with all
collected diagnostics (syntax and semantic alike).
"""

from __future__ import annotations

from ..errors import ModelError
from ..machine import (
    Assign,
    Binary,
    BoolLit,
    Call,
    Connection,
    Emit,
    EnumLit,
    Expr,
    IntLit,
    Junction,
    MachineState,
    MonitorDecl,
    SourceSpan,
    Transition,
    Trigger,
    Unary,
    Var,
)
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
from .lexer import Token, tokenize

_DECL_KEYWORDS = frozenset(
    "model range enum record platform machine connections config".split()
)
_MACHINE_KEYWORDS = frozenset(
    "const var monitor event operation initial state final junction transition".split()
)


class _Fail(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic


class _Parser:
    def __init__(self, text: str, filename: str):
        self.tokens = tokenize(text, filename)
        self.pos = 0
        self.diags: list[Diagnostic] = []
        self.enum_members: dict[str, EnumLit] = {}

    # -- token plumbing -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, *kinds: str) -> bool:
        tok = self.peek()
        return tok.kind in kinds or tok.text in kinds

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.text in words

    def accept(self, *kinds: str) -> Token | None:
        if self.at(*kinds):
            return self.next()
        return None

    def accept_keyword(self, *words: str) -> Token | None:
        if self.at_keyword(*words):
            return self.next()
        return None

    def expect(self, kind: str, expected: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind == kind or tok.text == kind:
            return self.next()
        raise _Fail(
            Diagnostic(tok.span, f"unexpected {_describe(tok)}", (expected or kind,))
        )

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == "keyword" and tok.text == word:
            return self.next()
        raise _Fail(Diagnostic(tok.span, f"unexpected {_describe(tok)}", (word,)))

    def name(self, what: str = "name") -> Token:
        """A name position; keywords are allowed (state machines may reuse
        words like ``final`` for enum members)."""
        tok = self.peek()
        if tok.kind in ("ident", "keyword"):
            return self.next()
        raise _Fail(Diagnostic(tok.span, f"unexpected {_describe(tok)}", (what,)))

    def dotted(self, what: str = "dotted name") -> tuple[str, SourceSpan]:
        first = self.name(what)
        parts = [first.text]
        while self.at(".") :
            self.next()
            parts.append(self.name(what).text)
        return ".".join(parts), first.span

    def integer(self) -> int:
        sign = 1
        if self.accept("-"):
            sign = -1
        tok = self.expect("int", "integer")
        return sign * int(tok.text)

    def skip_to(self, keywords: frozenset[str]) -> None:
        depth = 0
        while not self.at("eof"):
            tok = self.peek()
            if depth == 0 and tok.kind == "keyword" and tok.text in keywords:
                return
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                if depth == 0:
                    return
                depth -= 1
            self.next()

    # -- model structure ----------------------------------------------------

    def model(self) -> ModelFile:
        if self.at("eof"):
            return ModelFile(name="", declarations=())
        name = ""
        span = self.peek().span
        try:
            self.expect_keyword("model")
            name = self.name("model name").text
        except _Fail as f:
            self.diags.append(f.diagnostic)
            self.skip_to(_DECL_KEYWORDS)
        decls = []
        while not self.at("eof"):
            try:
                decls.append(self.declaration())
            except _Fail as f:
                self.diags.append(f.diagnostic)
                self.next()
                self.skip_to(_DECL_KEYWORDS)
        return ModelFile(name=name, declarations=tuple(decls), span=span)

    def declaration(self):
        tok = self.peek()
        handlers = {
            "range": self.range_decl,
            "enum": self.enum_decl,
            "record": self.record_decl,
            "platform": self.platform_block,
            "machine": self.machine_def,
            "connections": self.connections_block,
            "config": self.config_decl,
        }
        if tok.kind == "keyword" and tok.text in handlers:
            return handlers[tok.text]()
        raise _Fail(
            Diagnostic(tok.span, f"unexpected {_describe(tok)}", tuple(sorted(handlers)))
        )

    def range_decl(self) -> RangeDecl:
        span = self.expect_keyword("range").span
        name = self.name("range name").text
        self.expect("=")
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        return RangeDecl(name, lo, hi, span)

    def enum_decl(self) -> EnumDecl:
        span = self.expect_keyword("enum").span
        name = self.name("enum name").text
        self.expect("{")
        members = []
        while not self.at("}"):
            members.append(self.name("enum member").text)
            if not self.accept(","):
                break
        self.expect("}")
        for i, member in enumerate(members):
            self.enum_members.setdefault(member, EnumLit(name, member, i))
        return EnumDecl(name, tuple(members), span)

    def record_decl(self) -> RecordDecl:
        from .ast import RawField

        span = self.expect_keyword("record").span
        name = self.name("record name").text
        self.expect("{")
        fields = []
        while not self.at("}"):
            fspan = self.peek().span
            fname = self.name("field name").text
            self.expect(":")
            fields.append(RawField(fname, self.type_ref(), fspan))
            if not self.accept(","):
                break
        self.expect("}")
        return RecordDecl(name, tuple(fields), span)

    def type_ref(self) -> str:
        if self.at_keyword("bool"):
            self.next()
            return "bool"
        if self.at("int") and self.peek().kind == "int" or self.at("-"):
            lo = self.integer()
            self.expect("..")
            hi = self.integer()
            return f"{lo}..{hi}"
        tok = self.name("type")
        return tok.text

    def platform_block(self) -> PlatformBlock:
        span = self.expect_keyword("platform").span
        self.expect("{")
        events: list[RawEvent] = []
        ops: list[RawOp] = []
        while not self.at("}"):
            if self.accept_keyword("event"):
                espan = self.peek().span
                ename = self.name("event name").text
                type_ref = None
                if not self.at_keyword("event", "operation") and not self.at("}"):
                    type_ref = self.type_ref()
                events.append(RawEvent(ename, "out", type_ref, espan))
            elif self.accept_keyword("operation"):
                ops.append(self.operation_decl())
            else:
                raise _Fail(
                    Diagnostic(self.peek().span, f"unexpected {_describe(self.peek())}",
                               ("event", "operation"))
                )
        self.expect("}")
        return PlatformBlock("platform", tuple(events), tuple(ops), span)

    def operation_decl(self) -> RawOp:
        span = self.peek().span
        name = self.name("operation name").text
        self.expect("(")
        params = []
        while not self.at(")"):
            params.append(self.type_ref())
            if not self.accept(","):
                break
        self.expect(")")
        return RawOp(name, tuple(params), span)

    # -- machines -----------------------------------------------------------

    def machine_def(self) -> MachineDef:
        span = self.expect_keyword("machine").span
        name = self.name("machine name").text
        self.expect("{")
        constants: list[RawConst] = []
        variables: list[RawVar] = []
        monitors: list[MonitorDecl] = []
        events: list[RawEvent] = []
        operations: list[RawOp] = []
        states: list[MachineState] = []
        junctions: list[Junction] = []
        transitions: list[Transition] = []
        initial = ""
        while not self.at("}"):
            try:
                tok = self.peek()
                if self.accept_keyword("const"):
                    cspan = tok.span
                    cname = self.name("constant name").text
                    self.expect(":")
                    self.expect_keyword("int")
                    value = self.integer() if self.accept("=") else None
                    constants.append(RawConst(cname, value, cspan))
                elif self.accept_keyword("var"):
                    vspan = tok.span
                    vname = self.name("variable name").text
                    self.expect(":")
                    tref = self.type_ref()
                    self.expect("=")
                    variables.append(RawVar(vname, tref, self.literal_tuple(), vspan))
                elif self.accept_keyword("monitor"):
                    mspan = tok.span
                    mname = self.name("monitor name").text
                    self.expect(":")
                    mtype = self.name("enum type").text
                    self.expect("=")
                    member = self.name("enum member").text
                    self.expect_keyword("tracks")
                    tracked = self.name("machine name").text
                    monitors.append(MonitorDecl(mname, mtype, member, tracked, mspan))
                elif self.accept_keyword("event"):
                    espan = tok.span
                    ename = self.name("event name").text
                    direction = "in" if self.accept_keyword("in") else None
                    if direction is None:
                        self.expect_keyword("out")
                        direction = "out"
                    type_ref = None
                    if not self.at("}") and not self.at_keyword(*_MACHINE_KEYWORDS):
                        type_ref = self.type_ref()
                    events.append(RawEvent(ename, direction, type_ref, espan))
                elif self.accept_keyword("operation"):
                    operations.append(self.operation_decl())
                elif self.accept_keyword("initial"):
                    initial = self.name("initial node").text
                elif self.at_keyword("state", "final"):
                    states.append(self.state_decl())
                elif self.accept_keyword("junction"):
                    junctions.append(Junction(self.name("junction name").text, tok.span))
                elif self.accept_keyword("transition"):
                    transitions.append(self.transition_decl(tok.span))
                else:
                    raise _Fail(
                        Diagnostic(tok.span, f"unexpected {_describe(tok)}",
                                   tuple(sorted(_MACHINE_KEYWORDS)))
                    )
            except _Fail as f:
                self.diags.append(f.diagnostic)
                self.next()
                self.skip_to(_MACHINE_KEYWORDS | _DECL_KEYWORDS)
                if self.at_keyword(*_DECL_KEYWORDS):
                    break
        self.accept("}")
        return MachineDef(
            name=name,
            constants=tuple(constants),
            variables=tuple(variables),
            monitors=tuple(monitors),
            events=tuple(events),
            operations=tuple(operations),
            initial=initial,
            states=tuple(states),
            junctions=tuple(junctions),
            transitions=tuple(transitions),
            span=span,
        )

    def literal_tuple(self) -> tuple[int, ...]:
        if self.accept("("):
            values = [self.literal_scalar()]
            while self.accept(","):
                values.append(self.literal_scalar())
            self.expect(")")
            return tuple(values)
        return (self.literal_scalar(),)

    def literal_scalar(self) -> int:
        if self.accept_keyword("true"):
            return 1
        if self.accept_keyword("false"):
            return 0
        tok = self.peek()
        if tok.kind in ("int", "-") or tok.text == "-":
            return self.integer()
        word = self.name("literal")
        lit = self.enum_members.get(word.text)
        if lit is None:
            raise _Fail(Diagnostic(word.span, f"unknown literal {word.text!r}"))
        return lit.value

    def state_decl(self) -> MachineState:
        span = self.peek().span
        final = bool(self.accept_keyword("final"))
        self.expect_keyword("state")
        name = self.name("state name").text
        entry: tuple = ()
        exit_: tuple = ()
        self.expect("{")
        while not self.at("}"):
            if self.accept_keyword("entry"):
                entry = self.action_block()
            elif self.accept_keyword("exit"):
                exit_ = self.action_block()
            else:
                raise _Fail(
                    Diagnostic(self.peek().span, f"unexpected {_describe(self.peek())}",
                               ("entry", "exit"))
                )
        self.expect("}")
        return MachineState(name, entry, exit_, final, span)

    def action_block(self) -> tuple:
        self.expect("{")
        actions = []
        while not self.at("}"):
            actions.append(self.action())
            self.accept(";")
        self.expect("}")
        return tuple(actions)

    def action(self):
        tok = self.peek()
        if self.accept_keyword("emit"):
            name = self.name("event name").text
            args: tuple = ()
            if self.accept("("):
                args = self.expr_list(")")
            return Emit(name, args, tok.span)
        if self.accept_keyword("call"):
            name = self.name("operation name").text
            self.expect("(")
            return Call(name, self.expr_list(")"), tok.span)
        target, span = self.dotted("assignment target")
        self.expect(":=")
        return Assign(target, self.expr(), span)

    def expr_list(self, closer: str) -> tuple:
        args = []
        while not self.at(closer):
            args.append(self.expr())
            if not self.accept(","):
                break
        self.expect(closer)
        return tuple(args)

    def transition_decl(self, span: SourceSpan) -> Transition:
        source = self.name("source node").text
        self.expect("->")
        target = self.name("target node").text
        trigger = None
        if self.accept_keyword("on"):
            event = self.name("event name").text
            binder = None
            if self.accept("?"):
                binder = self.name("binder").text
            trigger = Trigger(event, binder)
        guard = None
        if self.accept_keyword("when"):
            guard = self.expr()
        actions: tuple = ()
        if self.at("{"):
            actions = self.action_block()
        return Transition(source, target, trigger, guard, actions, None, span)

    # -- expressions ----------------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at_keyword("or"):
            span = self.next().span
            left = Binary("or", left, self.and_expr(), span)
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.at_keyword("and"):
            span = self.next().span
            left = Binary("and", left, self.not_expr(), span)
        return left

    def not_expr(self) -> Expr:
        if self.at_keyword("not"):
            span = self.next().span
            return Unary("not", self.not_expr(), span)
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.additive()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at(op):
                span = self.next().span
                return Binary(op, left, self.additive(), span)
        return left

    def additive(self) -> Expr:
        left = self.unary()
        while self.at("+", "-"):
            op = self.next()
            left = Binary(op.text, left, self.unary(), op.span)
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if self.accept("-"):
            inner = self.unary()
            if isinstance(inner, IntLit):
                return IntLit(-inner.value, tok.span)
            return Unary("neg", inner, tok.span)
        if self.at_keyword("abs"):
            span = self.next().span
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return Unary("abs", inner, span)
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return IntLit(int(tok.text), tok.span)
        if self.accept_keyword("true"):
            return BoolLit(True, tok.span)
        if self.accept_keyword("false"):
            return BoolLit(False, tok.span)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            name, span = self.dotted()
            lit = self.enum_members.get(name)
            if lit is not None:
                return EnumLit(lit.enum, lit.member, lit.value, span)
            return Var(name, span)
        raise _Fail(Diagnostic(tok.span, f"unexpected {_describe(tok)}", ("expression",)))

    # -- connections and configs ----------------------------------------------

    def connections_block(self) -> ConnectionsBlock:
        span = self.expect_keyword("connections").span
        self.expect("{")
        out = []
        while not self.at("}"):
            cspan = self.peek().span
            from_node = self.name("node").text
            self.expect(".")
            from_event = self.name("event").text
            self.expect("->")
            to_node = self.name("node").text
            self.expect(".")
            to_event = self.name("event").text
            async_ = bool(self.accept_keyword("async"))
            wire = None
            if self.accept_keyword("as"):
                wire, _ = self.dotted("wire label")
            out.append(
                Connection(from_node, from_event, to_node, to_event, async_, wire,
                           "unset", cspan)
            )
        self.expect("}")
        return ConnectionsBlock(tuple(out), span)

    def config_decl(self) -> ConfigDecl:
        span = self.expect_keyword("config").span
        name = self.name("config name").text
        self.expect("{")
        ranges = []
        consts = []
        while not self.at("}"):
            target, tspan = self.dotted("override target")
            self.expect("=")
            value = self.integer()
            if self.at(".."):
                self.next()
                hi = self.integer()
                if "." in target:
                    raise _Fail(Diagnostic(tspan, "range overrides name a range, not a constant"))
                ranges.append((target, value, hi))
            else:
                if "." not in target:
                    raise _Fail(
                        Diagnostic(tspan, "constant overrides use machine.constant form")
                    )
                machine, _, const = target.rpartition(".")
                consts.append((machine, const, value))
        self.expect("}")
        return ConfigDecl(name, tuple(ranges), tuple(consts), span)


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    if tok.kind in ("ident", "keyword", "int"):
        return f"{tok.kind} {tok.text!r}"
    return f"{tok.text!r}"


def parse_model(text: str, filename: str = "<input>") -> ModelFile:
    """Parse a model file; raises :class:`ModelError` with every diagnostic
    found (parsing recovers and continues after errors)."""
    parser = _Parser(text, filename)
    model = parser.model()
    from .loader import validate_model

    diags = parser.diags + validate_model(model)
    if diags:
        raise ModelError(diags)
    return model
