"""Tokenizer for model and assertion files.

Line comments start with ``//``.  Newlines are plain whitespace; the grammar
is keyword-delimited.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..machine import SourceSpan

KEYWORDS = frozenset(
    """
    model range enum record platform machine connections config
    const var monitor event operation initial state final junction transition
    on when entry exit emit call async as tracks in out bool int true false
    and or not abs
    assertions for spec over watch require deadline process hiding forbidding
    all stop timed assertion refines the traces is does terminate
    """.split()
)

_SYMBOLS = [
    "..", "->", ":=", "==", "!=", "<=", ">=",
    "{", "}", "(", ")", ",", ":", ";", ".", "=", "<", ">", "+", "-", "?", "!",
]


@dataclass(frozen=True)
class Token:
    kind: str   # "ident" | "int" | "keyword" | symbol text | "eof"
    text: str
    span: SourceSpan


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)

    def span(length: int) -> SourceSpan:
        return SourceSpan(filename, line, col, length)

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], span(j - i)))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, span(j - i)))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, span(len(sym))))
                col += len(sym)
                i += len(sym)
                break
        else:
            tokens.append(Token("error", c, span(1)))
            col += 1
            i += 1
    tokens.append(Token("eof", "", SourceSpan(filename, line, col, 0)))
    return tokens
