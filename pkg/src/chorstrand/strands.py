"""Strand spaces: directed events, strands, bundles, and the causal order.

A bundle collects finite prefixes of strands together with succession edges
(same strand, consecutive positions) and communication edges (a transmission
delivering its message to a reception).  Validity is the conjunction of five
clauses:

  prefix-closed   every node's earlier positions on its strand are present
  succession      the succession edges are exactly strand succession
  message-match   each communication edge sends +t into -t for the same t
  unique-source   every reception has exactly one incoming communication edge
  acyclic         the union of both edge sets has no cycle

The causal order is the reflexive-transitive closure of the two edge sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Mapping, TypeAlias

from .violations import Violation

__all__ = [
    "DirectedTerm",
    "Strand",
    "NodeRef",
    "Edge",
    "Bundle",
    "make_bundle",
    "validate_bundle",
    "CausalOrder",
    "causal_order",
    "minimal_nodes",
    "bundle_isomorphic",
    "iso_signature",
    "eq_match",
    "bundle_to_dot",
]

Direction: TypeAlias = Literal["+", "-"]


@dataclass(frozen=True)
class DirectedTerm:
    """A message with a sign: ``+`` transmission, ``-`` reception."""

    direction: Direction
    msg: object

    def __post_init__(self) -> None:
        if self.direction not in ("+", "-"):
            raise ValueError(f"direction must be '+' or '-', got {self.direction!r}")

    def __str__(self) -> str:
        return f"{self.direction}{self.msg}"


StrandKind: TypeAlias = Literal["regular", "adversary", "marker"]


@dataclass(frozen=True)
class Strand:
    """A named finite, nonempty sequence of directed events."""

    id: str
    trace: tuple[DirectedTerm, ...]
    kind: StrandKind = "regular"

    def __post_init__(self) -> None:
        if not self.trace:
            raise ValueError(f"strand {self.id!r} has an empty trace")
        if self.kind not in ("regular", "adversary", "marker"):
            raise ValueError(f"unknown strand kind {self.kind!r}")


@dataclass(frozen=True, order=True)
class NodeRef:
    """Position ``index`` (1-based) on the strand named ``strand``."""

    strand: str
    index: int


Edge: TypeAlias = tuple[NodeRef, NodeRef]


@dataclass(frozen=True)
class Bundle:
    """A node set over a strand table plus succession and communication edges."""

    strands: Mapping[str, Strand]
    nodes: frozenset[NodeRef]
    succ_edges: frozenset[Edge]
    comm_edges: frozenset[Edge]

    def event(self, n: NodeRef) -> DirectedTerm:
        return self.strands[n.strand].trace[n.index - 1]

    def height(self, strand_id: str) -> int:
        """Number of nodes of the given strand present in the bundle."""
        return max((n.index for n in self.nodes if n.strand == strand_id), default=0)

    def strand_ids(self) -> list[str]:
        return sorted({n.strand for n in self.nodes})

    def sorted_nodes(self) -> list[NodeRef]:
        return sorted(self.nodes)

    def transmissions(self) -> list[NodeRef]:
        return [n for n in self.sorted_nodes() if self.event(n).direction == "+"]

    def receptions(self) -> list[NodeRef]:
        return [n for n in self.sorted_nodes() if self.event(n).direction == "-"]


def make_bundle(
    strands: Iterable[Strand],
    comm_edges: Iterable[Edge] = (),
    heights: Mapping[str, int] | None = None,
) -> Bundle:
    """Assemble a bundle from whole strands (or prefixes given by heights).

    Succession edges are generated to satisfy the succession clause; the
    result is not otherwise checked, so feed it to validate_bundle if the
    communication wiring is in doubt.
    """
    supplied = list(strands)
    table = {s.id: s for s in supplied}
    if len(table) != len(supplied):
        raise ValueError("duplicate strand ids")
    nodes: set[NodeRef] = set()
    succ: set[Edge] = set()
    for sid, s in table.items():
        h = len(s.trace) if heights is None else heights.get(sid, len(s.trace))
        if not 0 <= h <= len(s.trace):
            raise ValueError(f"height {h} out of range for strand {sid!r}")
        for i in range(1, h + 1):
            nodes.add(NodeRef(sid, i))
            if i > 1:
                succ.add((NodeRef(sid, i - 1), NodeRef(sid, i)))
    return Bundle(table, frozenset(nodes), frozenset(succ), frozenset(comm_edges))


def _node_ok(b: Bundle, n: NodeRef) -> bool:
    return n.strand in b.strands and 1 <= n.index <= len(b.strands[n.strand].trace)


def validate_bundle(b: Bundle) -> list[Violation]:
    """All clause violations, empty when the bundle is valid."""
    violations: list[Violation] = []

    for n in b.sorted_nodes():
        if not _node_ok(b, n):
            violations.append(Violation("node-ref", f"node {n} does not lie on a known strand position"))
    known = {n for n in b.nodes if _node_ok(b, n)}

    for n in sorted(known):
        if n.index > 1 and NodeRef(n.strand, n.index - 1) not in known:
            violations.append(Violation("prefix-closed", f"node {n} present without its strand predecessor"))

    expected_succ = {
        (NodeRef(n.strand, n.index - 1), n)
        for n in known
        if n.index > 1 and NodeRef(n.strand, n.index - 1) in known
    }
    for e in sorted(b.succ_edges - expected_succ):
        violations.append(Violation("succession", f"edge {e[0]} => {e[1]} is not strand succession in the node set"))
    for e in sorted(expected_succ - b.succ_edges):
        violations.append(Violation("succession", f"missing succession edge {e[0]} => {e[1]}"))

    for m, n in sorted(b.comm_edges):
        if not (_node_ok(b, m) and _node_ok(b, n)) or m not in b.nodes or n not in b.nodes:
            violations.append(Violation("message-match", f"communication edge {m} -> {n} leaves the node set"))
            continue
        em, en = b.event(m), b.event(n)
        if em.direction != "+" or en.direction != "-" or em.msg != en.msg:
            violations.append(Violation("message-match", f"edge {m} -> {n} does not send +t into -t"))

    incoming: dict[NodeRef, int] = {}
    for m, n in b.comm_edges:
        incoming[n] = incoming.get(n, 0) + 1
    for n in sorted(known):
        if b.event(n).direction == "-":
            count = incoming.get(n, 0)
            if count != 1:
                violations.append(Violation("unique-source", f"reception {n} has {count} incoming communication edges"))

    if _has_cycle(b):
        violations.append(Violation("acyclic", "the succession and communication edges admit a cycle"))
    return violations


def _adjacency(b: Bundle) -> dict[NodeRef, list[NodeRef]]:
    adj: dict[NodeRef, list[NodeRef]] = {n: [] for n in b.nodes}
    for m, n in sorted(b.succ_edges | b.comm_edges):
        if m in adj and n in adj:
            adj[m].append(n)
    return adj


def _has_cycle(b: Bundle) -> bool:
    adj = _adjacency(b)
    state: dict[NodeRef, int] = {}

    def visit(n: NodeRef) -> bool:
        state[n] = 1
        for nxt in adj[n]:
            mark = state.get(nxt, 0)
            if mark == 1:
                return True
            if mark == 0 and visit(nxt):
                return True
        state[n] = 2
        return False

    return any(state.get(n, 0) == 0 and visit(n) for n in sorted(b.nodes))


@dataclass(frozen=True)
class CausalOrder:
    """Reflexive-transitive closure of a bundle's edges, queryable as leq."""

    reach: Mapping[NodeRef, frozenset[NodeRef]]

    def leq(self, n: NodeRef, m: NodeRef) -> bool:
        """True when n precedes m (or n == m) along the edges."""
        return n == m or m in self.reach[n]

    def minimal(self, subset: Iterable[NodeRef]) -> frozenset[NodeRef]:
        nodes = set(subset)
        if not nodes:
            raise ValueError("minimal members of an empty node set are undefined")
        missing = [n for n in nodes if n not in self.reach]
        if missing:
            raise ValueError(f"nodes outside the bundle: {sorted(missing)}")
        return frozenset(n for n in nodes if not any(m != n and self.leq(m, n) for m in nodes))


def causal_order(b: Bundle) -> CausalOrder:
    """The bundle's causal order; rejects invalid bundles."""
    problems = validate_bundle(b)
    if problems:
        raise ValueError(f"invalid bundle: {problems[0]}")
    adj = _adjacency(b)
    order = _topo_order(b, adj)
    reach: dict[NodeRef, set[NodeRef]] = {n: set() for n in b.nodes}
    for n in reversed(order):
        for nxt in adj[n]:
            reach[n].add(nxt)
            reach[n] |= reach[nxt]
    return CausalOrder({n: frozenset(r) for n, r in reach.items()})


def _topo_order(b: Bundle, adj: dict[NodeRef, list[NodeRef]]) -> list[NodeRef]:
    indeg: dict[NodeRef, int] = {n: 0 for n in b.nodes}
    for m in adj:
        for n in adj[m]:
            indeg[n] += 1
    frontier = sorted(n for n, d in indeg.items() if d == 0)
    out: list[NodeRef] = []
    while frontier:
        n = frontier.pop(0)
        out.append(n)
        for nxt in adj[n]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                frontier.append(nxt)
        frontier.sort()
    return out


def minimal_nodes(b: Bundle, subset: Iterable[NodeRef]) -> frozenset[NodeRef]:
    """Members of subset with no strict causal predecessor inside subset."""
    return causal_order(b).minimal(subset)


# --- isomorphism ---------------------------------------------------------
#
# Two bundles are isomorphic when a bijection of strand ids (within kinds)
# and a bijection of renamable message atoms carry one onto the other.  The
# message matcher is pluggable: eq_match for plain payloads, or a unifier
# threading an atom bijection for messages with renamable atoms.

MsgMatch = Callable[[object, object, dict, dict], bool]


def eq_match(m1: object, m2: object, fwd: dict, bwd: dict) -> bool:
    return m1 == m2


def _strand_profile(b: Bundle, sid: str, skeleton: Callable[[object], object] | None) -> tuple:
    h = b.height(sid)
    s = b.strands[sid]
    dirs = tuple(e.direction for e in s.trace[:h])
    if skeleton is None:
        return (s.kind, h, dirs)
    return (s.kind, h, dirs, tuple(skeleton(e.msg) for e in s.trace[:h]))


def iso_signature(b: Bundle, skeleton: Callable[[object], object] | None = None) -> tuple:
    """A cheap invariant under isomorphism, for bucketing before full checks.

    skeleton should map a message to a hashable form with renamable atoms
    replaced by a wildcard; None treats messages as opaque and ignores them.
    """
    prof = {sid: _strand_profile(b, sid, skeleton) for sid in b.strand_ids()}
    profiles = sorted(prof.values())
    comm = sorted(
        (prof[m.strand], m.index, prof[n.strand], n.index) for m, n in b.comm_edges
    )
    return (tuple(profiles), len(b.nodes), tuple(comm))


def bundle_isomorphic(b1: Bundle, b2: Bundle, msg_match: MsgMatch = eq_match) -> bool:
    """Exact structural equality up to strand renaming and atom renaming."""
    ids1, ids2 = b1.strand_ids(), b2.strand_ids()
    if len(ids1) != len(ids2) or len(b1.nodes) != len(b2.nodes):
        return False
    if len(b1.comm_edges) != len(b2.comm_edges):
        return False

    def compatible(sid1: str, sid2: str) -> bool:
        s1, s2 = b1.strands[sid1], b2.strands[sid2]
        h1, h2 = b1.height(sid1), b2.height(sid2)
        return (
            s1.kind == s2.kind
            and h1 == h2
            and all(s1.trace[i].direction == s2.trace[i].direction for i in range(h1))
        )

    def extend(i: int, mapping: dict[str, str], fwd: dict, bwd: dict) -> bool:
        if i == len(ids1):
            mapped = {(NodeRef(mapping[m.strand], m.index), NodeRef(mapping[n.strand], n.index)) for m, n in b1.comm_edges}
            return mapped == set(b2.comm_edges)
        sid1 = ids1[i]
        for sid2 in ids2:
            if sid2 in mapping.values() or not compatible(sid1, sid2):
                continue
            trial_fwd, trial_bwd = dict(fwd), dict(bwd)
            h = b1.height(sid1)
            t1, t2 = b1.strands[sid1].trace, b2.strands[sid2].trace
            if all(msg_match(t1[k].msg, t2[k].msg, trial_fwd, trial_bwd) for k in range(h)):
                mapping[sid1] = sid2
                if extend(i + 1, mapping, trial_fwd, trial_bwd):
                    return True
                del mapping[sid1]
        return False

    return extend(0, {}, {}, {})


# --- DOT export ----------------------------------------------------------


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def bundle_to_dot(b: Bundle, title: str = "bundle") -> str:
    """Graphviz rendering: strands as vertical chains, deliveries as labelled arrows."""
    lines = [f"digraph {_dot_quote(title)} {{", "  rankdir=TB;", "  node [shape=box, fontname=monospace];"]
    node_name = {n: f"n_{i}" for i, n in enumerate(b.sorted_nodes())}
    for sid in b.strand_ids():
        s = b.strands[sid]
        lines.append(f"  subgraph {_dot_quote('cluster_' + sid)} {{")
        lines.append(f"    label={_dot_quote(sid + ' (' + s.kind + ')')};")
        for i in range(1, b.height(sid) + 1):
            n = NodeRef(sid, i)
            lines.append(f"    {node_name[n]} [label={_dot_quote(str(b.event(n)))}];")
        lines.append("  }")
    for m, n in sorted(b.succ_edges):
        lines.append(f"  {node_name[m]} -> {node_name[n]} [style=bold, weight=10];")
    for m, n in sorted(b.comm_edges):
        label = _dot_quote(str(b.event(m).msg))
        lines.append(f"  {node_name[m]} -> {node_name[n]} [label={label}, constraint=false];")
    lines.append("}")
    return "\n".join(lines) + "\n"
