"""Abstraction maps: stripping cryptography out of concrete messages.

A map is an ordered list of rules ``pattern => op<extractors>``.  Patterns
are encrypted units whose first item is a literal tag; the tag anchors the
rule, and rules must use pairwise distinct tags so at most one rule can match
any message.  Extractors name pattern variables whose bindings become the
abstract payload (or literal identifiers, which become constant payload
values).  A message matching no rule has no abstraction: its node disappears
from strand and bundle images.

Besides the abstract payload, the image records for each payload item the
set of principals able to open the innermost encryption that carried it.
Choreography-level boxes are matched against that carrier set: a box for
addressee X is faithfully implemented only if the extracted value travelled
under a key X can open.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import chor
from .absem import Interaction
from .strands import Bundle, DirectedTerm, NodeRef, Strand, causal_order, make_bundle, validate_bundle
from .terms import Enc, Principal, PrivKey, PubKey, Seq, SymKey, Tag, Term, Value, Var, substitute, unify, vars_of
from .termtext import TermParser, TermSyntaxError, Tok, tokenize

__all__ = [
    "AmapError",
    "AbstractionRule",
    "AbstractionMap",
    "parse_abstraction_map",
    "load_abstraction_map",
    "AbstractedEvent",
    "apply_abstraction",
    "StrandImage",
    "strand_image",
    "BundleImage",
    "bundle_image",
    "key_openers",
]


class AmapError(ValueError):
    """Raised for syntax or consistency errors in an abstraction map."""


@dataclass(frozen=True)
class AbstractionRule:
    pattern: Enc
    op: str
    extractors: tuple[object, ...]  # Var names (str) or constant chor.Value

    @property
    def anchor(self) -> str:
        tag = self.pattern.body.items[0]
        assert isinstance(tag, Tag)
        return tag.token


@dataclass(frozen=True)
class AbstractionMap:
    rules: tuple[AbstractionRule, ...]


def _resolve_atom(tok: Tok) -> Term:
    return Tag(tok.text)


def _resolve_key(tok: Tok) -> Term:
    raise AmapError(f"{tok.line}:{tok.col}: pattern keys must be variables or pk()/sk(), not {tok.text!r}")


def parse_abstraction_map(text: str) -> AbstractionMap:
    try:
        toks = tokenize(text)
    except TermSyntaxError as exc:
        raise AmapError(str(exc)) from exc
    parser = TermParser(toks, _resolve_atom, _resolve_key)
    rules: list[AbstractionRule] = []
    while parser.peek().kind != "eof":
        try:
            pattern = parser.parse_unit()
        except TermSyntaxError as exc:
            raise AmapError(str(exc)) from exc
        tok = parser.peek()
        if not isinstance(pattern, Enc) or not pattern.body.items or not isinstance(pattern.body.items[0], Tag):
            raise AmapError(f"{tok.line}:{tok.col}: rule patterns must be encryptions starting with a literal tag")
        parser.take("=>")
        op = parser.take("ident").text
        parser.take("<")
        extractors: list[object] = []
        while parser.peek().kind != ">":
            item = parser.peek()
            if item.kind == "var":
                parser.pos += 1
                extractors.append(item.text)
            elif item.kind == "ident":
                parser.pos += 1
                extractors.append(chor.Value(item.text))
            elif item.kind == ",":
                parser.pos += 1
            else:
                raise AmapError(f"{item.line}:{item.col}: expected a variable or constant in extractors")
        parser.take(">")
        pattern_vars = set(vars_of(pattern))
        for e in extractors:
            if isinstance(e, str) and e not in pattern_vars:
                raise AmapError(f"extractor ?{e} does not occur in the pattern for {op!r}")
        rules.append(AbstractionRule(pattern, op, tuple(extractors)))
    if not rules:
        raise AmapError("abstraction map has no rules")
    anchors: dict[str, str] = {}
    for rule in rules:
        if rule.anchor in anchors:
            raise AmapError(
                f"rules for {anchors[rule.anchor]!r} and {rule.op!r} overlap on tag {rule.anchor!r}"
            )
        anchors[rule.anchor] = rule.op
    return AbstractionMap(tuple(rules))


def load_abstraction_map(path: str) -> AbstractionMap:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_abstraction_map(fh.read())


# --- applying the map ------------------------------------------------------


def key_openers(key: Term, key_endpoints: Mapping[str, frozenset[str]] | None) -> frozenset[str]:
    """Principals able to decrypt a unit locked with the given ground key."""
    if isinstance(key, PubKey):
        return frozenset([key.of])
    if isinstance(key, SymKey):
        base = key.name.split(".")[0]
        if key_endpoints and base in key_endpoints:
            return key_endpoints[base]
        return frozenset()
    return frozenset()


def _enclosing_enc(pattern: Term, var: str, current: Enc | None = None) -> Enc | None:
    """The innermost encryption of the pattern around the first occurrence
    of the variable."""
    if isinstance(pattern, Var):
        return current if pattern.name == var else None
    if isinstance(pattern, Seq):
        for item in pattern.items:
            found = _enclosing_enc(item, var, current)
            if found is not None:
                return found
        return None
    if isinstance(pattern, Enc):
        found = _enclosing_enc(pattern.body, var, pattern)
        if found is not None:
            return found
        return _enclosing_enc(pattern.key, var, pattern)
    return None


@dataclass(frozen=True)
class AbstractedEvent:
    op: str
    payload: tuple[chor.Value, ...]
    carriers: tuple[frozenset[str] | None, ...]

    def interaction(self) -> Interaction:
        return Interaction(self.op, self.payload)


def apply_abstraction(
    amap: AbstractionMap,
    t: Term,
    key_endpoints: Mapping[str, frozenset[str]] | None = None,
) -> AbstractedEvent | None:
    """Abstract one ground message; None when no rule applies."""
    for rule in amap.rules:
        theta = unify(rule.pattern, t)
        if theta is None:
            continue
        payload: list[chor.Value] = []
        carriers: list[frozenset[str] | None] = []
        ok = True
        for extractor in rule.extractors:
            if isinstance(extractor, chor.Value):
                payload.append(extractor)
                carriers.append(None)
                continue
            bound = theta[extractor]
            if isinstance(bound, Value):
                token = bound.token
            elif isinstance(bound, Principal):
                token = bound.name
            else:
                ok = False
                break
            payload.append(chor.Value(token))
            enc_pattern = _enclosing_enc(rule.pattern, extractor)
            if enc_pattern is None:
                carriers.append(None)
            else:
                key = substitute(enc_pattern.key, theta)
                carriers.append(key_openers(key, key_endpoints))
        if not ok:
            return None
        return AbstractedEvent(rule.op, tuple(payload), tuple(carriers))
    return None


@dataclass(frozen=True)
class StrandImage:
    """A strand's trace pushed through the map, empty events dropped."""

    id: str
    events: tuple[DirectedTerm, ...]  # messages are Interaction values
    sources: tuple[int, ...]  # 1-based concrete indices, one per event
    carriers: tuple[tuple[frozenset[str] | None, ...], ...]

    @property
    def vacuous(self) -> bool:
        return not self.events

    def strand(self) -> Strand:
        return Strand(self.id, self.events, "regular")


def strand_image(
    amap: AbstractionMap,
    s: Strand,
    key_endpoints: Mapping[str, frozenset[str]] | None = None,
    height: int | None = None,
) -> StrandImage:
    events: list[DirectedTerm] = []
    sources: list[int] = []
    carriers: list[tuple[frozenset[str] | None, ...]] = []
    upto = len(s.trace) if height is None else height
    for index, ev in enumerate(s.trace[:upto], start=1):
        abstracted = apply_abstraction(amap, ev.msg, key_endpoints)
        if abstracted is None:
            continue
        events.append(DirectedTerm(ev.direction, abstracted.interaction()))
        sources.append(index)
        carriers.append(abstracted.carriers)
    return StrandImage(s.id, tuple(events), tuple(sources), tuple(carriers))


@dataclass(frozen=True)
class BundleImage:
    bundle: Bundle
    to_concrete: Mapping[NodeRef, NodeRef]
    carriers: Mapping[NodeRef, tuple[frozenset[str] | None, ...]]
    vacuous_strands: tuple[str, ...]


def bundle_image(
    amap: AbstractionMap,
    c: Bundle,
    key_endpoints: Mapping[str, frozenset[str]] | None = None,
) -> BundleImage | None:
    """The abstract bundle induced by a concrete one.

    Strand images keep their concrete strand ids.  Each abstract reception is
    wired to an abstract transmission of the same interaction whose concrete
    node causally precedes the reception's; if some reception has no such
    transmission the image is undefined (None).
    """
    order = causal_order(c)
    images: list[StrandImage] = []
    vacuous: list[str] = []
    for sid in c.strand_ids():
        s = c.strands[sid]
        if s.kind != "regular":
            continue
        img = strand_image(amap, s, key_endpoints, height=c.height(sid))
        if img.vacuous:
            vacuous.append(sid)
        else:
            images.append(img)

    to_concrete: dict[NodeRef, NodeRef] = {}
    carriers: dict[NodeRef, tuple[frozenset[str] | None, ...]] = {}
    strands: list[Strand] = []
    for img in images:
        strands.append(img.strand())
        for j, src in enumerate(img.sources, start=1):
            to_concrete[NodeRef(img.id, j)] = NodeRef(img.id, src)
            carriers[NodeRef(img.id, j)] = img.carriers[j - 1]

    transmissions: list[tuple[NodeRef, Interaction]] = []
    receptions: list[tuple[NodeRef, Interaction]] = []
    for img in images:
        for j, ev in enumerate(img.events, start=1):
            node = NodeRef(img.id, j)
            if ev.direction == "+":
                transmissions.append((node, ev.msg))
            else:
                receptions.append((node, ev.msg))

    comm: list[tuple[NodeRef, NodeRef]] = []
    for rnode, rmsg in sorted(receptions):
        candidates = [
            tnode
            for tnode, tmsg in transmissions
            if tmsg == rmsg
            and to_concrete[tnode] != to_concrete[rnode]
            and order.leq(to_concrete[tnode], to_concrete[rnode])
        ]
        if not candidates:
            return None
        comm.append((min(candidates), rnode))

    bundle = make_bundle(strands, comm_edges=comm)
    problems = validate_bundle(bundle)
    if problems:
        return None
    return BundleImage(bundle, to_concrete, carriers, tuple(vacuous))
