"""Protocol descriptions: per-role message scripts over crypto terms.

A protocol file declares principals, tags, and per-role scripts.  Each role
script is a tree of directed events: ``+t`` transmits term t, ``-t`` receives
any message matching pattern t, ``.`` sequences, ``( a + b )`` branches, and
``0`` ends.  Identifiers resolve against the declarations: declared tags
become tag constants, declared principals become principal constants,
names declared ``fresh`` in the current role become nonces or session keys,
and anything else is a pattern variable bound by an earlier reception (or a
parameter supplied at instantiation time).

Example::

    protocol ping
    principals A B
    tags ping pong
    symkeys K

    role A
      param payload
      +{ping payload}K. -{pong payload}K. 0

    role B
      +... (omitted)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .strands import Bundle, DirectedTerm, NodeRef, Strand, causal_order
from .terms import (
    Enc,
    Nonce,
    Principal,
    PubKey,
    Seq,
    SymKey,
    Tag,
    Term,
    Value,
    Var,
    enc,
    ground,
    seq,
    substitute,
    subterms,
    vars_of,
)
from .termtext import TermParser, TermSyntaxError, Tok, tokenize

__all__ = [
    "ProtoError",
    "ScriptEnd",
    "ScriptStep",
    "ScriptChoice",
    "ScriptNode",
    "RoleScript",
    "RoleTemplate",
    "FamilySpec",
    "Protocol",
    "parse_protocol",
    "load_protocol",
    "instantiate",
    "canonical_params",
    "family_members",
    "outermost_encryptions",
    "in_family",
    "check_deliver_once",
    "nonce_cache_run",
]


class ProtoError(ValueError):
    """Raised for syntax or consistency errors in a protocol description."""


_RESERVED = {
    "protocol",
    "principals",
    "tags",
    "symkeys",
    "deliver_once",
    "role",
    "param",
    "fresh",
    "nonce",
    "key",
    "pk",
    "sk",
}


@dataclass(frozen=True)
class ScriptEnd:
    """Leaf of a role script: nothing left to do."""


@dataclass(frozen=True)
class ScriptStep:
    event: DirectedTerm
    cont: "ScriptNode"


@dataclass(frozen=True)
class ScriptChoice:
    """Internal choice between branches, each starting with an event."""

    options: tuple["ScriptNode", ...]


ScriptNode = ScriptEnd | ScriptStep | ScriptChoice


@dataclass(frozen=True)
class RoleScript:
    role: str
    body: ScriptNode
    params: tuple[str, ...]
    fresh_nonces: tuple[str, ...]
    fresh_keys: tuple[str, ...]

    @property
    def fresh_names(self) -> tuple[str, ...]:
        return self.fresh_nonces + self.fresh_keys

    def paths(self) -> list[tuple[DirectedTerm, ...]]:
        """All root-to-leaf event sequences of the script."""
        out: list[tuple[DirectedTerm, ...]] = []

        def walk(node: ScriptNode, prefix: tuple[DirectedTerm, ...]) -> None:
            if isinstance(node, ScriptEnd):
                out.append(prefix)
            elif isinstance(node, ScriptStep):
                walk(node.cont, prefix + (node.event,))
            else:
                for option in node.options:
                    walk(option, prefix)

        walk(self.body, ())
        return out


@dataclass(frozen=True)
class RoleTemplate:
    """One linear execution path of a role, ready to instantiate."""

    role: str
    trace: tuple[DirectedTerm, ...]
    params: tuple[str, ...]
    fresh_nonces: tuple[str, ...]
    fresh_keys: tuple[str, ...]

    @property
    def fresh_names(self) -> tuple[str, ...]:
        return self.fresh_nonces + self.fresh_keys


@dataclass(frozen=True)
class FamilySpec:
    """Deliver-once family: messages whose outermost encryption carries
    an instance of the named fresh value."""

    fresh_name: str


@dataclass(frozen=True)
class Protocol:
    name: str
    principals: tuple[str, ...]
    tags: tuple[str, ...]
    symkeys: tuple[str, ...]
    scripts: Mapping[str, RoleScript]
    families: tuple[FamilySpec, ...] = ()

    def roles(self) -> list[str]:
        return list(self.scripts)

    def templates(self, role: str | None = None) -> list[RoleTemplate]:
        out: list[RoleTemplate] = []
        for name, script in self.scripts.items():
            if role is not None and name != role:
                continue
            for trace in script.paths():
                used: set[str] = set()
                for ev in trace:
                    used |= vars_of(ev.msg)
                params = tuple(p for p in script.params if p in used)
                out.append(
                    RoleTemplate(
                        role=name,
                        trace=trace,
                        params=params,
                        fresh_nonces=tuple(n for n in script.fresh_nonces if _name_used(n, trace)),
                        fresh_keys=tuple(k for k in script.fresh_keys if _name_used(k, trace)),
                    )
                )
        return out

    def basis_terms(self) -> list[Term]:
        """Public material every party (adversary included) starts with."""
        out: list[Term] = [Principal(p) for p in self.principals]
        out.extend(PubKey(p) for p in self.principals)
        out.extend(Tag(t) for t in self.tags)
        return out

    def key_endpoints(self) -> dict[str, frozenset[str]]:
        """Principals each fresh session key is shared between.

        A fresh key of role R is shared between R (roles are named after the
        principal playing them) and every principal P under whose public key
        the originating role ever transmits the key.
        """
        out: dict[str, frozenset[str]] = {}
        for role, script in self.scripts.items():
            for kname in script.fresh_keys:
                key = SymKey(kname)
                endpoints = {role}
                for trace in script.paths():
                    for ev in trace:
                        if ev.direction != "+":
                            continue
                        for sub in subterms(ev.msg):
                            if isinstance(sub, Enc) and isinstance(sub.key, PubKey):
                                if key in subterms(sub.body):
                                    endpoints.add(sub.key.of)
                out[kname] = frozenset(endpoints)
        return out


def _name_used(name: str, trace: Iterable[DirectedTerm]) -> bool:
    needles = {Nonce(name), SymKey(name)}
    return any(not needles.isdisjoint(subterms(ev.msg)) for ev in trace)


# --- parsing ---------------------------------------------------------------


class _ProtoParser:
    def __init__(self, text: str) -> None:
        try:
            self.toks = tokenize(text)
        except TermSyntaxError as exc:
            raise ProtoError(str(exc)) from exc
        self.pos = 0

    def peek(self) -> Tok:
        return self.toks[self.pos]

    def next(self) -> Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect_ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected {what}, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return tok.text

    def expect_keyword(self, word: str) -> None:
        tok = self.peek()
        if tok.kind != "ident" or tok.text != word:
            self.fail(f"expected {word!r}, found {tok.text or 'end of input'!r}")
        self.pos += 1

    def fail(self, message: str) -> None:
        tok = self.peek()
        raise ProtoError(f"{tok.line}:{tok.col}: {message}")

    def name_list(self, what: str) -> list[str]:
        names = []
        while self.peek().kind == "ident" and self.peek().text not in _RESERVED:
            names.append(self.next().text)
        if not names:
            self.fail(f"expected at least one {what}")
        return names

    def parse(self) -> Protocol:
        self.expect_keyword("protocol")
        name = self.expect_ident("a protocol name")
        principals: list[str] = []
        tags: list[str] = []
        symkeys: list[str] = []
        family_names: list[str] = []
        while self.peek().kind == "ident" and self.peek().text in (
            "principals",
            "tags",
            "symkeys",
            "deliver_once",
        ):
            kw = self.next().text
            names = self.name_list(f"name after {kw!r}")
            if kw == "principals":
                principals.extend(names)
            elif kw == "tags":
                tags.extend(names)
            elif kw == "symkeys":
                symkeys.extend(names)
            else:
                family_names.extend(names)
        scripts: dict[str, RoleScript] = {}
        while self.peek().kind == "ident" and self.peek().text == "role":
            script = self.parse_role(principals, tags, symkeys)
            if script.role in scripts:
                raise ProtoError(f"role {script.role!r} declared twice")
            scripts[script.role] = script
        tok = self.peek()
        if tok.kind != "eof":
            self.fail(f"unexpected {tok.text!r}")
        if not scripts:
            raise ProtoError("protocol declares no roles")
        proto = Protocol(
            name=name,
            principals=tuple(principals),
            tags=tuple(tags),
            symkeys=tuple(symkeys),
            scripts=scripts,
            families=tuple(FamilySpec(n) for n in family_names),
        )
        _check_protocol(proto, family_names)
        return proto

    def parse_role(self, principals: list[str], tags: list[str], symkeys: list[str]) -> RoleScript:
        self.expect_keyword("role")
        role = self.expect_ident("a role name")
        params: list[str] = []
        fresh_nonces: list[str] = []
        fresh_keys: list[str] = []
        while self.peek().kind == "ident" and self.peek().text in ("param", "fresh"):
            kw = self.next().text
            if kw == "param":
                params.extend(self.name_list("parameter name"))
                continue
            kind = self.peek()
            if kind.kind != "ident" or kind.text not in ("nonce", "key"):
                self.fail("expected 'nonce' or 'key' after 'fresh'")
            self.next()
            names = self.name_list("fresh value name")
            if kind.text == "nonce":
                fresh_nonces.extend(names)
            else:
                fresh_keys.extend(names)

        local_fresh = set(fresh_nonces) | set(fresh_keys)
        declared = set(principals) | set(tags) | set(symkeys) | local_fresh
        overlap = (set(params) & declared) or (local_fresh & (set(principals) | set(tags) | set(symkeys)))
        if overlap:
            raise ProtoError(f"role {role!r}: name used in two declarations: {sorted(overlap)[0]!r}")

        def resolve(tok: Tok) -> Term:
            text = tok.text
            if text in tags:
                return Tag(text)
            if text in principals:
                return Principal(text)
            if text in fresh_nonces:
                return Nonce(text)
            if text in fresh_keys:
                return SymKey(text)
            if text in symkeys:
                return SymKey(text)
            return Var(text)

        def resolve_key(tok: Tok) -> Term:
            text = tok.text
            if text in fresh_keys or text in symkeys:
                return SymKey(text)
            if text in tags or text in principals:
                raise ProtoError(f"{tok.line}:{tok.col}: {text!r} cannot be used as a key")
            return Var(text)

        body = self.parse_node(resolve, resolve_key)
        script = RoleScript(
            role=role,
            body=body,
            params=tuple(params),
            fresh_nonces=tuple(fresh_nonces),
            fresh_keys=tuple(fresh_keys),
        )
        _check_script(script)
        return script

    def parse_node(self, resolve, resolve_key) -> ScriptNode:
        tok = self.peek()
        if tok.kind == "0":
            self.pos += 1
            return ScriptEnd()
        if tok.kind == "(":
            self.pos += 1
            options = [self.parse_node(resolve, resolve_key)]
            while self.peek().kind == "+" and self.toks[self.pos + 1].kind in ("+", "-", "(", "0"):
                self.pos += 1
                options.append(self.parse_node(resolve, resolve_key))
            if self.peek().kind != ")":
                self.fail("expected ')' or '+' between branches")
            self.pos += 1
            if len(options) == 1:
                return options[0]
            return ScriptChoice(tuple(options))
        if tok.kind in ("+", "-"):
            self.pos += 1
            parser = TermParser(self.toks, resolve, resolve_key)
            parser.pos = self.pos
            try:
                msg = parser.parse_seq()
            except TermSyntaxError as exc:
                raise ProtoError(str(exc)) from exc
            self.pos = parser.pos
            period = self.peek()
            if period.kind != ".":
                self.fail("expected '.' after an event")
            self.pos += 1
            return ScriptStep(DirectedTerm(tok.kind, msg), self.parse_node(resolve, resolve_key))
        self.fail(f"expected an event, '(', or '0', found {tok.text or 'end of input'!r}")
        raise AssertionError("unreachable")


def _check_script(script: RoleScript) -> None:
    """Every variable a transmission uses must be bound earlier on the path,
    and each fresh value must first appear in a transmission."""
    fresh_terms = {Nonce(n) for n in script.fresh_nonces} | {SymKey(k) for k in script.fresh_keys}
    for path in script.paths():
        bound = set(script.params)
        seen_fresh: set[Term] = set()
        for ev in path:
            names = set(vars_of(ev.msg))
            if ev.direction == "+":
                unbound = names - bound
                if unbound:
                    raise ProtoError(
                        f"role {script.role!r}: transmission uses unbound variable {sorted(unbound)[0]!r}"
                    )
            else:
                introduced = fresh_terms & set(subterms(ev.msg)) - seen_fresh
                if introduced:
                    bad = sorted(introduced, key=str)[0]
                    raise ProtoError(
                        f"role {script.role!r}: fresh value {bad.name!r} first appears in a reception"
                    )
                bound |= names
            seen_fresh |= fresh_terms & set(subterms(ev.msg))


def _check_protocol(proto: Protocol, family_names: list[str]) -> None:
    fresh_all: set[str] = set()
    for script in proto.scripts.values():
        fresh_all |= set(script.fresh_names)
    for fam in family_names:
        if fam not in fresh_all:
            raise ProtoError(f"deliver_once names {fam!r}, which no role declares fresh")
    for role in proto.scripts:
        if role not in proto.principals:
            raise ProtoError(f"role {role!r} is not a declared principal")


def parse_protocol(text: str) -> Protocol:
    return _ProtoParser(text).parse()


def load_protocol(path: str) -> Protocol:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_protocol(fh.read())


# --- instantiation ---------------------------------------------------------


def canonical_params(template: RoleTemplate | RoleScript) -> dict[str, Term]:
    """Bind each parameter to a value token of the same name."""
    return {p: Value(p) for p in template.params}


def _fresh_map(names: Iterable[str], suffix: str) -> dict[str, str]:
    return {n: f"{n}.{suffix}" for n in names}


def instantiate(
    template: RoleTemplate,
    params: Mapping[str, Term],
    suffix: str,
    strand_id: str | None = None,
) -> Strand:
    """Make a strand from a template: substitute parameters and rename
    fresh values with an instance suffix.  Reception-bound variables stay
    variables; they are resolved when the strand runs."""
    missing = [p for p in template.params if p not in params]
    if missing:
        raise ValueError(f"missing parameter {missing[0]!r} for role {template.role!r}")
    for name, value in params.items():
        if not ground(value):
            raise ValueError(f"parameter {name!r} must be ground")
    renaming = _fresh_map(template.fresh_names, suffix)
    trace = tuple(
        DirectedTerm(ev.direction, rename_fresh(substitute(ev.msg, dict(params)), renaming))
        for ev in template.trace
    )
    return Strand(id=strand_id or f"{template.role}.{suffix}", trace=trace, kind="regular")


def rename_fresh(t: Term, renaming: Mapping[str, str]) -> Term:
    if isinstance(t, Nonce) and t.name in renaming:
        return Nonce(renaming[t.name])
    if isinstance(t, SymKey) and t.name in renaming:
        return SymKey(renaming[t.name])
    if isinstance(t, Seq):
        return seq(*(rename_fresh(i, renaming) for i in t.items))
    if isinstance(t, Enc):
        items = [rename_fresh(i, renaming) for i in t.body.items]
        return enc(items, rename_fresh(t.key, renaming))
    return t


# --- deliver-once ----------------------------------------------------------


def outermost_encryptions(msg: Term) -> list[Enc]:
    """The encrypted units at the top of a message."""
    if isinstance(msg, Enc):
        return [msg]
    if isinstance(msg, Seq):
        return [item for item in msg.items if isinstance(item, Enc)]
    return []


def in_family(msg: Term, value: Term) -> bool:
    """Whether msg belongs to the family of the fresh value: some outermost
    encryption of msg carries the value (key position included)."""
    return any(value in subterms(unit) for unit in outermost_encryptions(msg))


def family_members(bundle: Bundle, value: Term) -> tuple[list[NodeRef], list[NodeRef]]:
    """Regular receptions and transmissions of family messages, in node order."""
    receptions: list[NodeRef] = []
    transmissions: list[NodeRef] = []
    for node in bundle.sorted_nodes():
        if bundle.strands[node.strand].kind != "regular":
            continue
        ev = bundle.event(node)
        if not in_family(ev.msg, value):
            continue
        (receptions if ev.direction == "-" else transmissions).append(node)
    return receptions, transmissions


def _max_matching(
    left: Sequence[NodeRef],
    right: Sequence[NodeRef],
    compatible: Callable[[NodeRef, NodeRef], bool],
) -> dict[NodeRef, NodeRef]:
    """Maximum bipartite matching by augmenting paths."""
    match_right: dict[NodeRef, NodeRef] = {}

    def augment(l: NodeRef, seen: set[NodeRef]) -> bool:
        for r in right:
            if r in seen or not compatible(l, r):
                continue
            seen.add(r)
            if r not in match_right or augment(match_right[r], seen):
                match_right[r] = l
                return True
        return False

    for l in left:
        augment(l, set())
    return {l: r for r, l in match_right.items()}


def check_deliver_once(bundle: Bundle, value: Term) -> tuple[bool, dict[NodeRef, NodeRef]]:
    """Deliver-once for one fresh value: each regular reception in its family
    must be chargeable to a distinct regular transmission in the family that
    causally precedes it.  Returns (ok, assignment); on failure the
    assignment is the best partial one."""
    receptions, transmissions = family_members(bundle, value)
    order = causal_order(bundle)
    assignment = _max_matching(receptions, transmissions, lambda r, t: order.leq(t, r))
    return len(assignment) == len(receptions), assignment


def nonce_cache_run(deliveries: Iterable[tuple[str, Term]]) -> list[tuple[str, Term, bool]]:
    """Replay-cache discipline a gateway could enforce: accept each delivered
    fresh value at most once.  Takes (node label, value) pairs in delivery
    order; returns (node label, value, accepted)."""
    seen: set[Term] = set()
    out = []
    for label, value in deliveries:
        accepted = value not in seen
        seen.add(value)
        out.append((label, value, accepted))
    return out
