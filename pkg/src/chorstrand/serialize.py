"""JSON encoding of messages, strands, and bundles.

Every document carries ``"schema": 1``.  Messages are tagged unions keyed on
``kind``; the same bundle container serves plain-text events, interaction
events from the choreography semantics, and crypto terms.
"""

from __future__ import annotations

import json
from typing import Any

from . import chor
from .absem import EndMarker, Interaction
from .strands import Bundle, DirectedTerm, NodeRef, Strand
from .terms import Enc, Nonce, PrivKey, Principal, PubKey, Seq, SymKey, Tag, Value, Var, enc, seq

__all__ = [
    "SCHEMA_VERSION",
    "msg_to_json",
    "msg_from_json",
    "bundle_to_json",
    "bundle_from_json",
    "bundle_to_text",
    "bundle_from_text",
]

SCHEMA_VERSION = 1


def msg_to_json(msg: object) -> dict[str, Any]:
    if isinstance(msg, str):
        return {"kind": "text", "text": msg}
    if isinstance(msg, chor.Value):
        return {"kind": "value", "token": msg.token}
    if isinstance(msg, chor.Box):
        return {
            "kind": "box",
            "contents": [msg_to_json(m) for m in msg.contents],
            "origin": msg.origin,
            "dest": msg.dest,
        }
    if isinstance(msg, Interaction):
        return {
            "kind": "interaction",
            "op": msg.op,
            "payload": [msg_to_json(m) for m in msg.payload],
        }
    if isinstance(msg, EndMarker):
        return {"kind": "end", "role": msg.role, "tag": msg.tag}
    if isinstance(msg, Value):
        return {"kind": "data", "token": msg.token}
    if isinstance(msg, Nonce):
        return {"kind": "nonce", "name": msg.name}
    if isinstance(msg, SymKey):
        return {"kind": "symkey", "name": msg.name}
    if isinstance(msg, PubKey):
        return {"kind": "pubkey", "of": msg.of}
    if isinstance(msg, PrivKey):
        return {"kind": "privkey", "of": msg.of}
    if isinstance(msg, Principal):
        return {"kind": "principal", "name": msg.name}
    if isinstance(msg, Tag):
        return {"kind": "tag", "token": msg.token}
    if isinstance(msg, Var):
        return {"kind": "var", "name": msg.name}
    if isinstance(msg, Seq):
        return {"kind": "seq", "items": [msg_to_json(i) for i in msg.items]}
    if isinstance(msg, Enc):
        return {
            "kind": "enc",
            "body": [msg_to_json(i) for i in msg.body.items],
            "key": msg_to_json(msg.key),
        }
    raise TypeError(f"cannot serialize message of type {type(msg).__name__}")


def msg_from_json(doc: dict[str, Any]) -> object:
    kind = doc.get("kind")
    if kind == "text":
        return doc["text"]
    if kind == "value":
        return chor.Value(doc["token"])
    if kind == "box":
        return chor.Box(
            tuple(msg_from_json(m) for m in doc["contents"]),
            doc["origin"],
            doc["dest"],
        )
    if kind == "interaction":
        return Interaction(doc["op"], tuple(msg_from_json(m) for m in doc["payload"]))
    if kind == "end":
        return EndMarker(doc["role"], doc["tag"])
    if kind == "data":
        return Value(doc["token"])
    if kind == "nonce":
        return Nonce(doc["name"])
    if kind == "symkey":
        return SymKey(doc["name"])
    if kind == "pubkey":
        return PubKey(doc["of"])
    if kind == "privkey":
        return PrivKey(doc["of"])
    if kind == "principal":
        return Principal(doc["name"])
    if kind == "tag":
        return Tag(doc["token"])
    if kind == "var":
        return Var(doc["name"])
    if kind == "seq":
        return seq(*(msg_from_json(i) for i in doc["items"]))
    if kind == "enc":
        return enc([msg_from_json(i) for i in doc["body"]], msg_from_json(doc["key"]))
    raise ValueError(f"unknown message kind {kind!r}")


def _node_to_json(n: NodeRef) -> list:
    return [n.strand, n.index]


def _node_from_json(doc: list) -> NodeRef:
    return NodeRef(doc[0], int(doc[1]))


def bundle_to_json(b: Bundle) -> dict[str, Any]:
    strands = []
    for sid in sorted(b.strands):
        s = b.strands[sid]
        strands.append(
            {
                "id": s.id,
                "kind": s.kind,
                "trace": [{"dir": ev.direction, "msg": msg_to_json(ev.msg)} for ev in s.trace],
            }
        )
    return {
        "schema": SCHEMA_VERSION,
        "strands": strands,
        "nodes": [_node_to_json(n) for n in b.sorted_nodes()],
        "succ_edges": sorted(
            ([_node_to_json(a), _node_to_json(c)] for a, c in b.succ_edges)
        ),
        "comm_edges": sorted(
            ([_node_to_json(a), _node_to_json(c)] for a, c in b.comm_edges)
        ),
    }


def bundle_from_json(doc: dict[str, Any]) -> Bundle:
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    strands = {}
    for sdoc in doc["strands"]:
        trace = tuple(DirectedTerm(e["dir"], msg_from_json(e["msg"])) for e in sdoc["trace"])
        strands[sdoc["id"]] = Strand(sdoc["id"], trace, sdoc.get("kind", "regular"))
    nodes = frozenset(_node_from_json(n) for n in doc["nodes"])
    comm = frozenset((_node_from_json(a), _node_from_json(c)) for a, c in doc["comm_edges"])
    if "succ_edges" in doc:
        succ = frozenset((_node_from_json(a), _node_from_json(c)) for a, c in doc["succ_edges"])
    else:
        succ = frozenset(
            (NodeRef(n.strand, n.index - 1), n) for n in nodes if n.index > 1 and NodeRef(n.strand, n.index - 1) in nodes
        )
    return Bundle(strands=strands, nodes=nodes, succ_edges=succ, comm_edges=comm)


def bundle_to_text(b: Bundle) -> str:
    return json.dumps(bundle_to_json(b), indent=2, sort_keys=True) + "\n"


def bundle_from_text(text: str) -> Bundle:
    return bundle_from_json(json.loads(text))
