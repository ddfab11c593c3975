"""Abstract bundle semantics of choreographies.

A choreography denotes a set of bundle environments, one per maximal branch
selection.  Each environment pairs a bundle over abstract events with a map
from roles to the current head node of that role's strand.  The denotation
is computed leaf-first: the inactive term gives every role a fresh
end-marker strand, and each communication prefixes a matched transmission
and reception pair onto the sender's and receiver's strands.

check_step_agreement verifies, over all reachable subterms, that removing
the first communication from the denotation's bundles matches the
denotation of the transition target (and that every removable label is a
possible transition).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, TypeAlias

from .chor import AbstractMessage, Choreography, Com, OpLabel, Role, Zero, roles_of
from .lts import LabelMu, step
from .strands import (
    Bundle,
    DirectedTerm,
    NodeRef,
    Strand,
    bundle_isomorphic,
    iso_signature,
    make_bundle,
)

__all__ = [
    "Interaction",
    "EndMarker",
    "AbsEvent",
    "BundleEnv",
    "zero_env",
    "prefix",
    "unprefix",
    "bundle_semantics",
    "abs_event_match",
    "abs_event_skeleton",
    "abs_bundles_equal",
    "env_label_sequence",
    "AgreementReport",
    "check_step_agreement",
]


@dataclass(frozen=True)
class Interaction:
    """The abstract content of one communication: operation plus payload."""

    op: OpLabel
    payload: tuple[AbstractMessage, ...]

    def __str__(self) -> str:
        return f"{self.op}<{','.join(str(m) for m in self.payload)}>"


@dataclass(frozen=True)
class EndMarker:
    """A role's termination event: a unique token nobody ever receives."""

    role: Role
    tag: str

    def __str__(self) -> str:
        return f"end({self.role},{self.tag})"


AbsEvent: TypeAlias = "Interaction | EndMarker"


@dataclass(frozen=True)
class BundleEnv:
    """A bundle over abstract events plus each role's current strand head."""

    bundle: Bundle
    who: Mapping[Role, NodeRef]

    def roles(self) -> list[Role]:
        return sorted(self.who)


def _role_strand(role: Role, trace: tuple[DirectedTerm, ...]) -> Strand:
    kind = "marker" if all(isinstance(e.msg, EndMarker) for e in trace) else "regular"
    return Strand(role, trace, kind)


def zero_env(roles: frozenset[Role], tags: Iterator[str]) -> BundleEnv:
    """The inactive term's environment: one fresh end-marker strand per role."""
    strands = [
        _role_strand(r, (DirectedTerm("+", EndMarker(r, next(tags))),)) for r in sorted(roles)
    ]
    bundle = make_bundle(strands)
    who = {r: NodeRef(r, 1) for r in sorted(roles)}
    return BundleEnv(bundle, who)


def prefix(env: BundleEnv, mu: LabelMu) -> BundleEnv:
    """Prepend mu's transmission/reception pair onto its endpoint strands."""
    if mu.sender not in env.who or mu.receiver not in env.who:
        raise ValueError(f"label endpoints {mu.sender!r}/{mu.receiver!r} missing from the environment")
    grown = {mu.sender: "+", mu.receiver: "-"}
    strands: list[Strand] = []
    for sid, s in env.bundle.strands.items():
        if sid in grown:
            event = DirectedTerm(grown[sid], Interaction(mu.op, mu.payload))
            strands.append(_role_strand(sid, (event,) + s.trace))
        else:
            strands.append(s)

    def shift(n: NodeRef) -> NodeRef:
        return NodeRef(n.strand, n.index + 1) if n.strand in grown else n

    comm = {(shift(m), shift(n)) for m, n in env.bundle.comm_edges}
    comm.add((NodeRef(mu.sender, 1), NodeRef(mu.receiver, 1)))
    who = {r: shift(n) for r, n in env.who.items()}
    who[mu.sender] = NodeRef(mu.sender, 1)
    who[mu.receiver] = NodeRef(mu.receiver, 1)
    return BundleEnv(make_bundle(strands, comm), who)


def unprefix(env: BundleEnv, mu: LabelMu) -> Bundle | None:
    """Remove mu's communication from the front, when env has that shape.

    Defined exactly when env equals prefix(e', mu) for some environment e':
    the heads of the endpoint strands carry mu's transmission and reception,
    wired to each other and to nothing else.
    """
    if mu.sender not in env.who or mu.receiver not in env.who:
        return None
    n1, n2 = env.who[mu.sender], env.who[mu.receiver]
    if n1 != NodeRef(mu.sender, 1) or n2 != NodeRef(mu.receiver, 1):
        return None
    want = Interaction(mu.op, mu.payload)
    b = env.bundle
    ev1, ev2 = b.event(n1), b.event(n2)
    if ev1 != DirectedTerm("+", want) or ev2 != DirectedTerm("-", want):
        return None
    if (n1, n2) not in b.comm_edges:
        return None
    for m, n in b.comm_edges:
        if (m, n) != (n1, n2) and (m in (n1, n2) or n in (n1, n2)):
            return None
    # The prefixed strands keep their remaining trace, so both must go on.
    if len(b.strands[mu.sender].trace) < 2 or len(b.strands[mu.receiver].trace) < 2:
        return None
    shrunk = {mu.sender, mu.receiver}
    strands: list[Strand] = []
    for sid, s in b.strands.items():
        strands.append(_role_strand(sid, s.trace[1:]) if sid in shrunk else s)

    def unshift(n: NodeRef) -> NodeRef:
        return NodeRef(n.strand, n.index - 1) if n.strand in shrunk else n

    comm = {(unshift(m), unshift(n)) for m, n in b.comm_edges if (m, n) != (n1, n2)}
    return make_bundle(strands, comm)


def bundle_semantics(c: Choreography, roles: frozenset[Role] | None = None) -> list[BundleEnv]:
    """One environment per maximal branch selection of the choreography.

    The role set for the leaves defaults to roles_of(c) and is threaded down
    unchanged, so every environment covers every role of the whole term.
    """
    role_set = roles_of(c) if roles is None else roles
    tags = (f"end{k}" for k in itertools.count())

    def go(node: Choreography) -> list[BundleEnv]:
        if isinstance(node, Zero):
            return [zero_env(role_set, tags)]
        envs: list[BundleEnv] = []
        for b in node.branches:
            mu = LabelMu(b.sender, b.receiver, b.op, b.payload)
            envs.extend(prefix(e, mu) for e in go(b.continuation))
        return envs

    return go(c)


# --- comparison modulo marker-tag renaming --------------------------------


def _bind(fwd: dict, bwd: dict, a: object, b: object) -> bool:
    if a in fwd:
        return fwd[a] == b
    if b in bwd:
        return False
    fwd[a] = b
    bwd[b] = a
    return True


def abs_event_match(m1: object, m2: object, fwd: dict, bwd: dict) -> bool:
    """Event equality with end-marker tags treated as renamable atoms."""
    if isinstance(m1, EndMarker) and isinstance(m2, EndMarker):
        return m1.role == m2.role and _bind(fwd, bwd, m1.tag, m2.tag)
    return m1 == m2


def abs_event_skeleton(msg: object) -> object:
    if isinstance(msg, EndMarker):
        return ("end", msg.role)
    return ("ev", str(msg))


def abs_bundles_equal(left: list[Bundle], right: list[Bundle]) -> bool:
    """Multiset equality of bundles modulo strand and marker-tag renaming."""
    if len(left) != len(right):
        return False
    remaining = list(right)
    for b in left:
        for i, other in enumerate(remaining):
            if iso_signature(b, abs_event_skeleton) == iso_signature(other, abs_event_skeleton) and bundle_isomorphic(
                b, other, abs_event_match
            ):
                del remaining[i]
                break
        else:
            return False
    return not remaining


def env_label_sequence(env: BundleEnv, node_order: list[NodeRef] | None = None) -> tuple[LabelMu, ...]:
    """The communication sequence read off the bundle in causal order.

    node_order may supply any topological order of the bundle's nodes; the
    label sequence is read from the transmissions in that order.
    """
    b = env.bundle
    if node_order is None:
        from .strands import _adjacency, _topo_order  # local: avoid public surface

        node_order = _topo_order(b, _adjacency(b))
    target = {m: n for m, n in b.comm_edges}
    labels: list[LabelMu] = []
    for n in node_order:
        ev = b.event(n)
        if ev.direction == "+" and isinstance(ev.msg, Interaction) and n in target:
            labels.append(LabelMu(n.strand, target[n].strand, ev.msg.op, ev.msg.payload))
    return tuple(labels)


# --- agreement between the transition system and the denotation -----------


@dataclass
class AgreementReport:
    ok: bool
    states_checked: int
    transitions_checked: int
    counterexamples: list[str] = field(default_factory=list)
    interpretation: str = (
        "removal clause compares {B with mu's first communication removed, where defined} "
        "against the denotation of the transition target, as sets modulo renaming"
    )


def _head_labels(env: BundleEnv) -> list[LabelMu]:
    """Labels whose unprefix could possibly be defined on env."""
    b = env.bundle
    out = []
    for m, n in sorted(b.comm_edges):
        if m.index == 1 and n.index == 1:
            ev = b.event(m).msg
            if isinstance(ev, Interaction) and env.who.get(m.strand) == m and env.who.get(n.strand) == n:
                out.append(LabelMu(m.strand, n.strand, ev.op, ev.payload))
    return out


def check_step_agreement(c: Choreography, depth_bound: int) -> AgreementReport:
    """Check that transitions and bundle prefix-removal tell the same story.

    For every subterm reachable within depth_bound steps: (1) for each
    transition with label mu, the defined prefix-removals of the subterm's
    bundles equal the target's bundles modulo renaming; (2) every label
    removable from some bundle is the label of an actual transition.
    """
    report = AgreementReport(ok=True, states_checked=0, transitions_checked=0)
    role_set = roles_of(c)
    sem_cache: dict[Choreography, list[BundleEnv]] = {}

    def sem(node: Choreography) -> list[BundleEnv]:
        if node not in sem_cache:
            sem_cache[node] = bundle_semantics(node, role_set)
        return sem_cache[node]

    seen: set[Choreography] = set()
    frontier: list[tuple[Choreography, int]] = [(c, 0)]
    while frontier:
        state, depth = frontier.pop(0)
        if state in seen:
            continue
        seen.add(state)
        report.states_checked += 1
        transitions = sorted(step(state), key=lambda t: str(t[0]))
        envs = sem(state)
        for mu, target in transitions:
            report.transitions_checked += 1
            removed = [x for x in (unprefix(e, mu) for e in envs) if x is not None]
            expected = [e.bundle for e in sem(target)]
            if not abs_bundles_equal(removed, expected):
                report.ok = False
                report.counterexamples.append(
                    f"removal mismatch at {mu}: {len(removed)} removed bundle(s) vs {len(expected)} expected"
                )
            if depth < depth_bound:
                frontier.append((target, depth + 1))
        steppable = {mu for mu, _ in transitions}
        for env in envs:
            for mu in _head_labels(env):
                if unprefix(env, mu) is not None and mu not in steppable:
                    report.ok = False
                    report.counterexamples.append(f"removable label {mu} has no matching transition")
    return report
