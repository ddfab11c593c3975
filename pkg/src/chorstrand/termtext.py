"""Shared concrete syntax for crypto terms in protocol and map files.

Units are ``{item item ...}key`` encryptions; ``^`` joins units into
sequences; ``pk(P)``/``sk(P)`` name the key pair of principal P; ``?x`` is a
pattern variable; bare identifiers are resolved by the caller (declarations
decide whether an identifier is a tag, principal, fresh value, or variable).
``#`` starts a line comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .terms import Enc, PrivKey, PubKey, Term, Var, enc, seq

__all__ = ["TermSyntaxError", "Tok", "tokenize", "TermParser"]


class TermSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Tok:
    kind: str  # "ident", "var", punctuation, or "eof"
    text: str
    line: int
    col: int


_PUNCT = "{}()^.+-,0"


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "?":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise TermSyntaxError("expected a name after '?'", line, col)
            toks.append(Tok("var", text[i + 1 : j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Tok("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in _PUNCT:
            toks.append(Tok(c, c, line, col))
            i += 1
            col += 1
            continue
        if text.startswith("=>", i):
            toks.append(Tok("=>", "=>", line, col))
            i += 2
            col += 2
            continue
        if c in "<>=":
            toks.append(Tok(c, c, line, col))
            i += 1
            col += 1
            continue
        raise TermSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Tok("eof", "", line, col))
    return toks


class TermParser:
    """Recursive-descent term reader over a token list.

    resolve_atom turns a bare identifier into a term; resolve_key does the
    same for identifiers in key position (after a closing brace).
    """

    def __init__(
        self,
        tokens: list[Tok],
        resolve_atom: Callable[[Tok], Term],
        resolve_key: Callable[[Tok], Term] | None = None,
    ) -> None:
        self.tokens = tokens
        self.pos = 0
        self.resolve_atom = resolve_atom
        self.resolve_key = resolve_key or resolve_atom

    def peek(self) -> Tok:
        return self.tokens[self.pos]

    def take(self, kind: str) -> Tok:
        tok = self.tokens[self.pos]
        if tok.kind != kind:
            raise TermSyntaxError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def error(self, message: str) -> TermSyntaxError:
        tok = self.peek()
        return TermSyntaxError(message, tok.line, tok.col)

    def parse_seq(self) -> Term:
        """A ^-joined sequence of units."""
        units = [self.parse_unit()]
        while self.peek().kind == "^":
            self.pos += 1
            units.append(self.parse_unit())
        return seq(*units)

    def parse_unit(self) -> Term:
        tok = self.peek()
        if tok.kind == "{":
            return self.parse_enc()
        if tok.kind == "(":
            self.pos += 1
            inner = self.parse_seq()
            self.take(")")
            return inner
        return self.parse_atom()

    def parse_enc(self) -> Enc:
        self.take("{")
        items = [self.parse_unit()]
        while self.peek().kind not in ("}", "eof"):
            items.append(self.parse_unit())
        self.take("}")
        return enc(items, self.parse_key())

    def parse_key(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident" and tok.text in ("pk", "sk"):
            self.pos += 1
            self.take("(")
            name = self.take("ident")
            self.take(")")
            return PubKey(name.text) if tok.text == "pk" else PrivKey(name.text)
        if tok.kind == "var":
            self.pos += 1
            return Var(tok.text)
        if tok.kind == "ident":
            self.pos += 1
            return self.resolve_key(tok)
        raise self.error(f"expected a key, found {tok.text or 'end of input'!r}")

    def parse_atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "var":
            self.pos += 1
            return Var(tok.text)
        if tok.kind == "ident":
            if tok.text in ("pk", "sk") and self.tokens[self.pos + 1].kind == "(":
                return self.parse_key()
            self.pos += 1
            return self.resolve_atom(tok)
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")
