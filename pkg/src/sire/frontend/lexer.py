from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import LexError, Pos

KEYWORDS = frozenset({
    "seq", "par", "for", "do", "server", "is", "interface", "to", "call",
    "val", "var", "chan", "proc", "initial", "accept", "final", "skip",
})

# longest match first
OPERATORS = (":=", ";", "|", "&", "=", "+", "-", "*", "!", "?")
WORD_OPERATORS = frozenset({"rem"})
PUNCTUATION = frozenset("()[]{},.")


class Kind(Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    INTEGER = "integer-literal"
    OPERATOR = "operator"
    PUNCTUATION = "punctuation"


@dataclass(frozen=True)
class Token:
    kind: Kind
    text: str
    line: int
    column: int

    @property
    def pos(self) -> Pos:
        return Pos(self.line, self.column)

    def __repr__(self) -> str:
        return f"{self.kind.value}:{self.text!r}@{self.line}:{self.column}"


def tokenize(source: str) -> list[Token]:
    """Split source text into tokens; ``--`` starts a comment to end of line."""
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isascii() and (ch.isalpha() or ch == "_"):
            j = i
            while j < n and source[j].isascii() and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            if word in KEYWORDS:
                kind = Kind.KEYWORD
            elif word in WORD_OPERATORS:
                kind = Kind.OPERATOR
            else:
                kind = Kind.IDENTIFIER
            tokens.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isascii() and ch.isdigit():
            j = i
            while j < n and source[j].isascii() and source[j].isdigit():
                j += 1
            if j < n and source[j].isascii() and (source[j].isalpha() or source[j] == "_"):
                raise LexError(f"malformed number '{source[i:j + 1]}'", Pos(line, start_col))
            tokens.append(Token(Kind.INTEGER, source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token(Kind.OPERATOR, op, line, start_col))
                i += len(op)
                col += len(op)
                break
        else:
            if ch in PUNCTUATION:
                tokens.append(Token(Kind.PUNCTUATION, ch, line, start_col))
                i += 1
                col += 1
            else:
                raise LexError(f"unexpected character {ch!r}", Pos(line, start_col))
    return tokens
