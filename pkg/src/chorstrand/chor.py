"""Choreography mini-language: syntax tree, parser, printer, static checks.

A choreography is either the inactive term ``0`` or a finite sum of
interactions ``a -> b : op<M, ...>. C`` sharing one sender/receiver pair.
Payload messages are plain values or boxes ``box[M, ...]{a,b}`` that only
the annotated addressee may open.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, TypeAlias

from .violations import Violation

Role: TypeAlias = str
OpLabel: TypeAlias = str

__all__ = [
    "Role",
    "OpLabel",
    "Value",
    "Box",
    "AbstractMessage",
    "Zero",
    "Branch",
    "Com",
    "Choreography",
    "ChorParseError",
    "parse_choreography",
    "chor_to_text",
    "message_to_text",
    "check_static_assumptions",
    "roles_of",
    "sender_of",
]


@dataclass(frozen=True)
class Value:
    """An uninterpreted payload token such as ``prod`` or ``quote``."""

    token: str

    def __str__(self) -> str:
        return self.token


@dataclass(frozen=True)
class Box:
    """Payload sealed by ``origin`` so that only ``dest`` may open it."""

    contents: tuple["AbstractMessage", ...]
    origin: Role
    dest: Role

    def __post_init__(self) -> None:
        if self.origin == self.dest:
            raise ValueError(f"box origin and destination coincide: {self.origin}")

    def __str__(self) -> str:
        inner = ",".join(str(m) for m in self.contents)
        return f"box[{inner}]{{{self.origin},{self.dest}}}"


AbstractMessage: TypeAlias = "Value | Box"


@dataclass(frozen=True)
class Zero:
    """The inactive choreography."""

    def __str__(self) -> str:
        return "0"


@dataclass(frozen=True)
class Branch:
    sender: Role
    receiver: Role
    op: OpLabel
    payload: tuple[AbstractMessage, ...]
    continuation: "Choreography"


@dataclass(frozen=True)
class Com:
    """A sum of interaction branches with a common sender/receiver pair."""

    branches: tuple[Branch, ...]

    def __post_init__(self) -> None:
        if not self.branches:
            raise ValueError("a communication needs at least one branch")
        s, r = self.branches[0].sender, self.branches[0].receiver
        if s == r:
            raise ValueError(f"sender and receiver coincide: {s}")
        for b in self.branches:
            if (b.sender, b.receiver) != (s, r):
                raise ValueError("all branches of a sum must share sender and receiver")

    @property
    def sender(self) -> Role:
        return self.branches[0].sender

    @property
    def receiver(self) -> Role:
        return self.branches[0].receiver


Choreography: TypeAlias = "Com | Zero"


class ChorParseError(ValueError):
    """Raised on malformed choreography text, carrying the offending position."""

    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


_PUNCT = ("->", "(", ")", "[", "]", "{", "}", "<", ">", ":", ".", ",", "+", "0")


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" or one of _PUNCT or "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
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
        if text.startswith("->", i):
            toks.append(_Token("->", "->", line, col))
            i += 2
            col += 2
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in "()[]{}<>:.,+0":
            toks.append(_Token(c, c, line, col))
            i += 1
            col += 1
            continue
        raise ChorParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


@dataclass
class _Parser:
    tokens: list[_Token]
    pos: int = field(default=0)

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, kind: str) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != kind:
            raise ChorParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def parse_choreography(self) -> Choreography:
        tok = self.peek()
        if tok.kind == "0":
            self.pos += 1
            return Zero()
        if tok.kind == "(":
            self.pos += 1
            branches = [self.parse_interaction()]
            while self.peek().kind == "+":
                self.pos += 1
                branches.append(self.parse_interaction())
            self.take(")")
            first = branches[0]
            for b in branches[1:]:
                if (b.sender, b.receiver) != (first.sender, first.receiver):
                    raise ChorParseError(
                        f"branches of a sum must share endpoints, got {first.sender}->{first.receiver} and {b.sender}->{b.receiver}",
                        tok.line,
                        tok.col,
                    )
            return Com(tuple(branches))
        return Com((self.parse_interaction(),))

    def parse_interaction(self) -> Branch:
        sender = self.take("ident").text
        self.take("->")
        recv_tok = self.take("ident")
        receiver = recv_tok.text
        if receiver == sender:
            raise ChorParseError(f"interaction from {sender} to itself", recv_tok.line, recv_tok.col)
        self.take(":")
        op = self.take("ident").text
        self.take("<")
        payload: list[AbstractMessage] = []
        if self.peek().kind != ">":
            payload.append(self.parse_message())
            while self.peek().kind == ",":
                self.pos += 1
                payload.append(self.parse_message())
        self.take(">")
        self.take(".")
        cont = self.parse_choreography()
        return Branch(sender, receiver, op, tuple(payload), cont)

    def parse_message(self) -> AbstractMessage:
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "box":
            self.pos += 1
            self.take("[")
            contents: list[AbstractMessage] = []
            if self.peek().kind != "]":
                contents.append(self.parse_message())
                while self.peek().kind == ",":
                    self.pos += 1
                    contents.append(self.parse_message())
            self.take("]")
            self.take("{")
            origin = self.take("ident").text
            self.take(",")
            dest_tok = self.take("ident")
            self.take("}")
            if origin == dest_tok.text:
                raise ChorParseError("box origin and destination coincide", dest_tok.line, dest_tok.col)
            return Box(tuple(contents), origin, dest_tok.text)
        if tok.kind == "ident":
            self.pos += 1
            return Value(tok.text)
        raise ChorParseError(f"expected a message, found {tok.text or 'end of input'!r}", tok.line, tok.col)


def parse_choreography(text: str) -> Choreography:
    """Parse choreography source text; raises ChorParseError on bad input."""
    parser = _Parser(_tokenize(text))
    chor = parser.parse_choreography()
    tail = parser.peek()
    if tail.kind != "eof":
        raise ChorParseError(f"trailing input starting at {tail.text!r}", tail.line, tail.col)
    return chor


def message_to_text(m: AbstractMessage) -> str:
    return str(m)


def _branch_to_text(b: Branch) -> str:
    payload = ",".join(str(m) for m in b.payload)
    return f"{b.sender} -> {b.receiver} : {b.op}<{payload}>. {chor_to_text(b.continuation)}"


def chor_to_text(c: Choreography) -> str:
    """Render a choreography in the concrete syntax accepted by the parser."""
    if isinstance(c, Zero):
        return "0"
    if len(c.branches) == 1:
        return _branch_to_text(c.branches[0])
    return "( " + " + ".join(_branch_to_text(b) for b in c.branches) + " )"


def _iter_branches(c: Choreography) -> Iterator[Branch]:
    if isinstance(c, Com):
        for b in c.branches:
            yield b
            yield from _iter_branches(b.continuation)


def _boxes_in(m: AbstractMessage) -> Iterator[Box]:
    if isinstance(m, Box):
        yield m
        for inner in m.contents:
            yield from _boxes_in(inner)


def _paths(c: Choreography) -> Iterator[tuple[Branch, ...]]:
    """All root-to-leaf interaction sequences."""
    if isinstance(c, Zero):
        yield ()
        return
    for b in c.branches:
        for rest in _paths(b.continuation):
            yield (b,) + rest


def roles_of(c: Choreography) -> frozenset[Role]:
    """Every role mentioned as an endpoint or inside a box annotation."""
    roles: set[Role] = set()
    for b in _iter_branches(c):
        roles.add(b.sender)
        roles.add(b.receiver)
        for m in b.payload:
            for box in _boxes_in(m):
                roles.add(box.origin)
                roles.add(box.dest)
    return frozenset(roles)


def sender_of(c: Choreography) -> Role | None:
    """Sender of the first communication, or None for the inactive term."""
    return c.sender if isinstance(c, Com) else None


def check_static_assumptions(c: Choreography) -> list[Violation]:
    """Check the three syntactic assumptions the semantics rely on.

    1. every operation label occurs in exactly one branch;
    2. boxes are first sent by their originator and eventually reach their
       addressee on every path where they occur;
    3. after any communication, the next sender is the previous receiver.
    """
    violations: list[Violation] = []

    seen_ops: dict[OpLabel, int] = {}
    for b in _iter_branches(c):
        seen_ops[b.op] = seen_ops.get(b.op, 0) + 1
    for op, count in sorted(seen_ops.items()):
        if count > 1:
            violations.append(Violation("duplicate-op-label", f"operation {op!r} occurs in {count} branches"))

    def walk_alternation(node: Choreography) -> None:
        if isinstance(node, Zero):
            return
        for b in node.branches:
            cont = b.continuation
            if isinstance(cont, Com) and cont.sender != b.receiver:
                violations.append(
                    Violation(
                        "sender-alternation",
                        f"after {b.op!r} the sender is {cont.sender!r}, expected previous receiver {b.receiver!r}",
                    )
                )
            walk_alternation(cont)

    walk_alternation(c)

    reported: set[tuple[str, Box]] = set()
    for path in _paths(c):
        occurrences: dict[Box, list[Branch]] = {}
        for b in path:
            for m in b.payload:
                for box in _boxes_in(m):
                    occurrences.setdefault(box, []).append(b)
        for box, carriers in occurrences.items():
            first = carriers[0]
            if first.sender != box.origin and ("first-sender", box) not in reported:
                reported.add(("first-sender", box))
                violations.append(
                    Violation(
                        "box-first-sender",
                        f"{box} first occurs in {first.op!r} sent by {first.sender!r}, not by its originator",
                    )
                )
            if all(b.receiver != box.dest for b in carriers) and ("delivery", box) not in reported:
                reported.add(("delivery", box))
                violations.append(
                    Violation(
                        "box-never-delivered",
                        f"{box} never reaches an interaction whose receiver is {box.dest!r}",
                    )
                )
    return violations
