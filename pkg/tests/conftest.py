"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's own algorithms:

- naive_valid re-checks the bundle definition clause by clause, using
  networkx for the acyclicity part;
- the greeting strands and their three diagrams are transcribed by hand
  and every expected fact about them (validity, causal order, minima) is
  frozen in the tests that use them;
- success_bundle wires the Buyer-Seller success path node by node, so the
  enumerator's output can be compared against a bundle it never produced.
"""

from __future__ import annotations

import random

import networkx as nx
import pytest

from chorstrand import data_path
from chorstrand.chor import Value as ChorValue
from chorstrand.chor import Branch, Com, Zero, parse_choreography
from chorstrand.strands import Bundle, DirectedTerm, NodeRef, Strand, make_bundle
from chorstrand.terms import Enc, Nonce, Principal, PubKey, SymKey, Tag, Value, enc, seq


# --------------------------------------------------------------------------
# independent bundle validity oracle


def naive_valid(b: Bundle) -> bool:
    """Re-check every clause of the bundle definition from scratch."""
    for n in b.nodes:
        s = b.strands.get(n.strand)
        if s is None or not 1 <= n.index <= len(s.trace):
            return False
    for n in b.nodes:
        if n.index > 1 and NodeRef(n.strand, n.index - 1) not in b.nodes:
            return False
    expected_succ = {
        (NodeRef(n.strand, n.index - 1), n) for n in b.nodes if n.index > 1
    }
    if b.succ_edges != frozenset(expected_succ):
        return False
    for t, r in b.comm_edges:
        if t not in b.nodes or r not in b.nodes:
            return False
        if b.event(t).direction != "+" or b.event(r).direction != "-":
            return False
        if b.event(t).msg != b.event(r).msg:
            return False
    for n in b.nodes:
        if b.event(n).direction == "-":
            if sum(1 for _, r in b.comm_edges if r == n) != 1:
                return False
    g = nx.DiGraph()
    g.add_nodes_from(b.nodes)
    g.add_edges_from(b.succ_edges)
    g.add_edges_from(b.comm_edges)
    return nx.is_directed_acyclic_graph(g)


# --------------------------------------------------------------------------
# random structures


def random_bundle_candidate(rng: random.Random, max_nodes: int = 12) -> Bundle:
    """A random graph shaped like a bundle, valid or not.

    Roughly half the output is built correctly (prefix-closed node sets,
    generated succession, matched unique-source communication) and half has
    one ingredient sampled freely, so both verdicts occur often.
    """
    alphabet = ["hi", "lo", "ack", "syn"]
    n_strands = rng.randint(1, 4)
    strands = []
    for i in range(n_strands):
        length = rng.randint(1, max(1, max_nodes // n_strands))
        trace = tuple(
            DirectedTerm(rng.choice("+-"), rng.choice(alphabet)) for _ in range(length)
        )
        strands.append(Strand(f"s{i}", trace))
    table = {s.id: s for s in strands}

    tidy = rng.random() < 0.5
    if tidy:
        heights = {s.id: rng.randint(0, len(s.trace)) for s in strands}
        nodes = {
            NodeRef(s.id, i)
            for s in strands
            for i in range(1, heights[s.id] + 1)
        }
    else:
        all_refs = [NodeRef(s.id, i) for s in strands for i in range(1, len(s.trace) + 1)]
        nodes = {n for n in all_refs if rng.random() < 0.7}

    succ = {(NodeRef(n.strand, n.index - 1), n) for n in nodes if n.index > 1}
    if not tidy and succ and rng.random() < 0.3:
        succ.discard(rng.choice(sorted(succ)))

    def ev(n: NodeRef) -> DirectedTerm:
        return table[n.strand].trace[n.index - 1]

    comm: set[tuple[NodeRef, NodeRef]] = set()
    receptions = [n for n in nodes if ev(n).direction == "-"]
    transmissions = [n for n in nodes if ev(n).direction == "+"]
    for r in receptions:
        partners = [t for t in transmissions if ev(t).msg == ev(r).msg and t.strand != r.strand]
        if tidy and partners:
            comm.add((rng.choice(partners), r))
        elif not tidy:
            if transmissions and rng.random() < 0.8:
                comm.add((rng.choice(transmissions), r))
            if transmissions and rng.random() < 0.2:
                comm.add((rng.choice(transmissions), r))
    return Bundle(table, frozenset(nodes), frozenset(succ), frozenset(comm))


def random_choreography(rng: random.Random, max_roles: int = 4,
                        max_branches: int = 3, max_depth: int = 4) -> Com | Zero:
    """A random choreography satisfying all three static assumptions."""
    roles = [f"R{i}" for i in range(rng.randint(2, max_roles))]
    counter = [0]

    def fresh_op() -> str:
        counter[0] += 1
        return f"op{counter[0]}"

    def build(expected_sender: str | None, depth: int) -> Com | Zero:
        if depth == 0 or rng.random() < 0.2:
            return Zero()
        sender = expected_sender or rng.choice(roles)
        receiver = rng.choice([r for r in roles if r != sender])
        branches = []
        for _ in range(rng.randint(1, max_branches)):
            payload = tuple(
                ChorValue(f"v{counter[0]}_{j}") for j in range(rng.randint(0, 2))
            )
            branches.append(
                Branch(sender, receiver, fresh_op(), payload, build(receiver, depth - 1))
            )
        return Com(tuple(branches))

    c = build(None, max_depth)
    if isinstance(c, Zero):
        c = Com((Branch(roles[0], roles[1], fresh_op(), (), Zero()),))
    return c


# --------------------------------------------------------------------------
# greeting strands (used across the strand-space tests)


HELLO = Strand("s1", (DirectedTerm("+", "Hello"), DirectedTerm("-", "Bye")))
WISH = Strand("s2", (DirectedTerm("+", "Good luck"), DirectedTerm("-", "Thanks")))
REPLY = Strand("s3", (DirectedTerm("-", "Good luck"), DirectedTerm("+", "Thanks")))
HOST = Strand(
    "s4",
    (
        DirectedTerm("-", "Hello"),
        DirectedTerm("-", "Good luck"),
        DirectedTerm("+", "Thanks"),
        DirectedTerm("+", "Bye"),
    ),
)
GUEST = Strand("s5", (DirectedTerm("-", "Thanks"), DirectedTerm("+", "Bye")))


@pytest.fixture
def wish_reply_bundle() -> Bundle:
    """Two strands exchanging a wish and its acknowledgement."""
    return make_bundle(
        [WISH, REPLY],
        comm_edges=[
            (NodeRef("s2", 1), NodeRef("s3", 1)),
            (NodeRef("s3", 2), NodeRef("s2", 2)),
        ],
    )


@pytest.fixture
def host_bundle() -> Bundle:
    """Three strands where one party greets, wishes, and is answered."""
    return make_bundle(
        [HELLO, HOST, WISH],
        comm_edges=[
            (NodeRef("s1", 1), NodeRef("s4", 1)),
            (NodeRef("s2", 1), NodeRef("s4", 2)),
            (NodeRef("s4", 3), NodeRef("s2", 2)),
            (NodeRef("s4", 4), NodeRef("s1", 2)),
        ],
    )


@pytest.fixture
def interference_bundle() -> Bundle:
    """The wish answered toward a bystander; two strand tails are cut off."""
    return make_bundle(
        [HELLO, HOST, WISH, GUEST],
        comm_edges=[
            (NodeRef("s1", 1), NodeRef("s4", 1)),
            (NodeRef("s2", 1), NodeRef("s4", 2)),
            (NodeRef("s4", 3), NodeRef("s5", 1)),
            (NodeRef("s5", 2), NodeRef("s1", 2)),
        ],
        heights={"s4": 3, "s2": 1},
    )


# --------------------------------------------------------------------------
# a tiny protocol that cannot implement its choreography: the one reception
# waits for a message nobody sends

STUCK_PROTO_TEXT = """
protocol stuck
principals A B
tags t u
role A
  -{t x y}pk(A). 0
role B
  +{u}pk(B). 0
"""
STUCK_CHOR_TEXT = "B -> A : x<v>. 0\n"
STUCK_AMAP_TEXT = "{t ?x ?y}?k => x<?x>\n"


# --------------------------------------------------------------------------
# Buyer-Seller sample files


@pytest.fixture(scope="session")
def bs_chor_path() -> str:
    return data_path("buyer_seller.chor")


@pytest.fixture(scope="session")
def bs_proto_path() -> str:
    return data_path("buyer_seller.proto")


@pytest.fixture(scope="session")
def bs_amap_path() -> str:
    return data_path("buyer_seller.amap")


@pytest.fixture(scope="session")
def bs_chor(bs_chor_path):
    with open(bs_chor_path) as fh:
        return parse_choreography(fh.read())


# --------------------------------------------------------------------------
# hand-wired success-path bundle for the Buyer-Seller protocol
#
# Transcribed event by event from the role scripts with the canonical
# instantiation (parameter name = its own token, fresh names suffixed with
# the strand id).  Nothing here touches the loader or the enumerator.

C, S, B = Principal("C"), Principal("S"), Principal("B")
N1, N2 = Nonce("N1.C1"), Nonce("N2.B1")
KSC, KBS, KBC = SymKey("Ksc.S1"), SymKey("Kbs.B1"), SymKey("Kbc.B1")

M1 = enc([Tag("cs"), C, B, N1], PubKey("S"))
M2 = enc([Tag("cb"), C, S, N1], PubKey("B"))
M3 = enc([Tag("sb"), C, S, N1], PubKey("B"))
M4 = enc([Tag("bsk"), N2, N1, KBS], PubKey("S"))
M5 = enc([Tag("bck"), N1, KBC], PubKey("C"))
M6 = enc([Tag("sck"), N1, N2, KSC], PubKey("C"))
P1 = enc([Tag("req"), N2, C, S, B, Value("prod")], KSC)
P2 = enc([Tag("reply"), Value("quote")], KSC)
CARD_BOX = enc([Value("card")], KBC)
P3 = enc([Tag("ok"), CARD_BOX], KSC)
P4 = enc([Tag("pay"), CARD_BOX, C, S], KBS)
RCPT_BOX = enc([Tag("rcpt"), Value("receipt")], KBC)
P5 = enc([Tag("okcf"), RCPT_BOX], KBS)


def _plus(msg):
    return DirectedTerm("+", msg)


def _minus(msg):
    return DirectedTerm("-", msg)


SUCCESS_C = Strand(
    "C1",
    (
        _plus(seq(M1, M2)),
        _minus(seq(M5, M6)),
        _plus(P1),
        _minus(P2),
        _plus(P3),
        _minus(RCPT_BOX),
    ),
)
SUCCESS_S = Strand(
    "S1",
    (
        _minus(seq(M1, M2)),
        _plus(seq(M3, M2)),
        _minus(seq(M4, M5)),
        _plus(seq(M5, M6)),
        _minus(P1),
        _plus(P2),
        _minus(P3),
        _plus(P4),
        _minus(P5),
        _plus(RCPT_BOX),
    ),
)
SUCCESS_B = Strand(
    "B1",
    (
        _minus(seq(M3, M2)),
        _plus(seq(M4, M5)),
        _minus(P4),
        _plus(P5),
    ),
)

SUCCESS_EDGES = [
    (NodeRef("C1", 1), NodeRef("S1", 1)),
    (NodeRef("S1", 2), NodeRef("B1", 1)),
    (NodeRef("B1", 2), NodeRef("S1", 3)),
    (NodeRef("S1", 4), NodeRef("C1", 2)),
    (NodeRef("C1", 3), NodeRef("S1", 5)),
    (NodeRef("S1", 6), NodeRef("C1", 4)),
    (NodeRef("C1", 5), NodeRef("S1", 7)),
    (NodeRef("S1", 8), NodeRef("B1", 3)),
    (NodeRef("B1", 4), NodeRef("S1", 9)),
    (NodeRef("S1", 10), NodeRef("C1", 6)),
]


@pytest.fixture(scope="session")
def success_bundle() -> Bundle:
    return make_bundle([SUCCESS_C, SUCCESS_S, SUCCESS_B], comm_edges=SUCCESS_EDGES)


@pytest.fixture(scope="session")
def replay_bundle() -> Bundle:
    """One payment transmission delivered to two bank instances."""
    sender = Strand("S1", (_plus(P4),))
    bank1 = Strand("B1", (_minus(P4),))
    bank2 = Strand("B2", (_minus(P4),))
    return make_bundle(
        [sender, bank1, bank2],
        comm_edges=[
            (NodeRef("S1", 1), NodeRef("B1", 1)),
            (NodeRef("S1", 1), NodeRef("B2", 1)),
        ],
    )
