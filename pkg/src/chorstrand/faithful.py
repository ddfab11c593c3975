"""Bounded faithfulness of a crypto protocol to a choreography.

Clause 1: every abstract execution of the choreography is the image of some
enumerated concrete bundle (exact payloads, end-marker strands ignored).
Clause 2: every enumerated concrete bundle separates into per-session
components, and each component's image is an initial sub-bundle of some
abstract execution under a substitution of payload values and principal
names.

Both clauses are checked within finite bounds, so a passing verdict is a
bounded claim, not a proof.  Bound exhaustion and failed separations yield
INCONCLUSIVE rather than FAIL.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .absem import BundleEnv, EndMarker, Interaction, bundle_semantics
from .abstraction import AbstractionMap, BundleImage, bundle_image
from .chor import Box, Choreography, Value, check_static_assumptions
from .protocol import Protocol
from .search import Bounds, EnumeratedBundle, enumerate_bundles
from .serialize import bundle_to_json
from .strands import Bundle, NodeRef, make_bundle, validate_bundle
from .terms import subterms

__all__ = [
    "ComponentFamily",
    "fingerprints_of",
    "separate",
    "is_initial_subbundle",
    "strip_markers",
    "FaithfulnessReport",
    "check_faithfulness",
]


@dataclass(frozen=True)
class ComponentFamily:
    """Separation of a bundle into per-session components.

    Each component is a valid bundle covering some of the regular strands
    plus the adversary strands that serve them.
    """

    components: tuple[Bundle, ...]

    def regular_node_sets(self) -> list[frozenset[NodeRef]]:
        out = []
        for comp in self.components:
            out.append(
                frozenset(n for n in comp.nodes if comp.strands[n.strand].kind == "regular")
            )
        return out


def fingerprints_of(eb: EnumeratedBundle) -> dict[str, frozenset[str]]:
    """Fresh-value names appearing on each regular strand."""
    terms = {f.term(): f.name for f in eb.fresh}
    out: dict[str, frozenset[str]] = {}
    for sid in eb.bundle.strand_ids():
        if eb.bundle.strands[sid].kind != "regular":
            continue
        found = set()
        for ev in eb.bundle.strands[sid].trace[: eb.bundle.height(sid)]:
            for sub in subterms(ev.msg):
                if sub in terms:
                    found.add(terms[sub])
        out[sid] = frozenset(found)
    return out


class _UnionFind:
    def __init__(self, items: Iterable[str]) -> None:
        self.parent = {i: i for i in items}

    def find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def separate(c: Bundle, fingerprints: Mapping[str, frozenset[str]]) -> ComponentFamily | None:
    """Partition a bundle into sessions.

    Regular strands are grouped when their fresh-value fingerprints overlap;
    any two strands joined by a delivery edge are also grouped, which pulls
    each adversary strand into the session it serves.  None when an induced
    component is not a valid bundle on its own (some other family of
    components might still exist).
    """
    uf = _UnionFind(c.strand_ids())
    regulars = [sid for sid in c.strand_ids() if c.strands[sid].kind == "regular"]
    for i, a in enumerate(regulars):
        for b in regulars[i + 1 :]:
            if fingerprints.get(a, frozenset()) & fingerprints.get(b, frozenset()):
                uf.union(a, b)
    for m, n in c.comm_edges:
        uf.union(m.strand, n.strand)

    groups: dict[str, list[str]] = {}
    for sid in c.strand_ids():
        groups.setdefault(uf.find(sid), []).append(sid)

    components = []
    for root in sorted(groups):
        sids = set(groups[root])
        strands = [c.strands[sid] for sid in sorted(sids)]
        heights = {sid: c.height(sid) for sid in sids}
        comm = [(m, n) for m, n in c.comm_edges if m.strand in sids and n.strand in sids]
        comp = make_bundle(strands, comm_edges=comm, heights=heights)
        if validate_bundle(comp):
            return None
        components.append(comp)
    return ComponentFamily(tuple(components))


def strip_markers(env: BundleEnv) -> Bundle:
    """The environment's bundle with end-marker strands removed and the
    trailing end-marker event cut off each remaining strand."""
    b = env.bundle
    strands = []
    heights: dict[str, int] = {}
    for sid in b.strand_ids():
        s = b.strands[sid]
        if s.kind == "marker":
            continue
        h = b.height(sid)
        while h > 0 and isinstance(s.trace[h - 1].msg, EndMarker):
            h -= 1
        if h == 0:
            continue
        strands.append(s)
        heights[sid] = h
    kept_nodes = {NodeRef(sid, i) for sid, h in heights.items() for i in range(1, h + 1)}
    comm = [(m, n) for m, n in b.comm_edges if m in kept_nodes and n in kept_nodes]
    return make_bundle(strands, comm_edges=comm, heights=heights)


# --- embeddings ------------------------------------------------------------


def _bind(mapping: dict[str, str], key: str, value: str) -> bool:
    if key in mapping:
        return mapping[key] == value
    mapping[key] = value
    return True


def _match_payload_item(
    env_item: object,
    img_item: object,
    carrier: frozenset[str] | None,
    sv: dict[str, str] | None,
    sr: dict[str, str] | None,
) -> bool:
    """One abstract payload position: env side may be a value or a box,
    image side is always a value with carrier metadata."""
    if not isinstance(img_item, Value):
        return False
    if isinstance(env_item, Value):
        if sv is None:
            return env_item.token == img_item.token
        return _bind(sv, env_item.token, img_item.token)
    if isinstance(env_item, Box):
        if len(env_item.contents) != 1 or not isinstance(env_item.contents[0], Value):
            return False
        if carrier is None:
            return False
        inner = env_item.contents[0]
        if sv is None:
            if inner.token != img_item.token:
                return False
            return env_item.dest in carrier
        if not _bind(sv, inner.token, img_item.token):
            return False
        if sr is None:
            return env_item.dest in carrier
        if env_item.dest in sr:
            return sr[env_item.dest] in carrier
        if env_item.dest in carrier:
            sr[env_item.dest] = env_item.dest
            return True
        if len(carrier) == 1:
            sr[env_item.dest] = next(iter(carrier))
            return True
        return False
    return False


def _match_abs_event(
    env_ev,
    img_ev,
    img_carrier: tuple[frozenset[str] | None, ...],
    sv: dict[str, str] | None,
    sr: dict[str, str] | None,
) -> bool:
    if env_ev.direction != img_ev.direction:
        return False
    a, b = env_ev.msg, img_ev.msg
    if not isinstance(a, Interaction) or not isinstance(b, Interaction):
        return False
    if a.op != b.op or len(a.payload) != len(b.payload):
        return False
    for i, (ia, ib) in enumerate(zip(a.payload, b.payload)):
        carrier = img_carrier[i] if i < len(img_carrier) else None
        if not _match_payload_item(ia, ib, carrier, sv, sr):
            return False
    return True


def _match_env_image(env_b: Bundle, image: BundleImage) -> bool:
    """Exact isomorphism between an abstract execution and a bundle image:
    same strands, same events (boxes checked against carriers), same edges."""
    img_b = image.bundle
    ids1, ids2 = env_b.strand_ids(), img_b.strand_ids()
    if len(ids1) != len(ids2) or len(env_b.comm_edges) != len(img_b.comm_edges):
        return False

    def assign(i: int, mapping: dict[str, str]) -> bool:
        if i == len(ids1):
            mapped = {
                (NodeRef(mapping[m.strand], m.index), NodeRef(mapping[n.strand], n.index))
                for m, n in env_b.comm_edges
            }
            return mapped == set(img_b.comm_edges)
        sid1 = ids1[i]
        h1 = env_b.height(sid1)
        t1 = env_b.strands[sid1].trace
        for sid2 in ids2:
            if sid2 in mapping.values() or img_b.height(sid2) != h1:
                continue
            t2 = img_b.strands[sid2].trace
            if all(
                _match_abs_event(t1[k], t2[k], image.carriers[NodeRef(sid2, k + 1)], None, None)
                for k in range(h1)
            ):
                mapping[sid1] = sid2
                if assign(i + 1, mapping):
                    return True
                del mapping[sid1]
        return False

    return assign(0, {})


def _embed_image_env(image: BundleImage, env_b: Bundle) -> tuple[dict[str, str], dict[str, str]] | None:
    """Initial-sub-bundle embedding of a component image into an abstract
    execution, discovering a substitution over payload values and principal
    names.  Returns (value substitution, role substitution) or None."""
    img_b = image.bundle
    ids1 = img_b.strand_ids()
    ids2 = env_b.strand_ids()

    def assign(i: int, mapping: dict[str, str], sv: dict[str, str], sr: dict[str, str]):
        if i == len(ids1):
            for m, n in img_b.comm_edges:
                edge = (NodeRef(mapping[m.strand], m.index), NodeRef(mapping[n.strand], n.index))
                if edge not in env_b.comm_edges:
                    return None
            return (sv, sr)
        sid1 = ids1[i]
        h1 = img_b.height(sid1)
        t1 = img_b.strands[sid1].trace
        for sid2 in ids2:
            if sid2 in mapping.values() or env_b.height(sid2) < h1:
                continue
            t2 = env_b.strands[sid2].trace
            trial_sv, trial_sr = dict(sv), dict(sr)
            if all(
                _match_abs_event(t2[k], t1[k], image.carriers[NodeRef(sid1, k + 1)], trial_sv, trial_sr)
                for k in range(h1)
            ):
                mapping[sid1] = sid2
                found = assign(i + 1, mapping, trial_sv, trial_sr)
                if found is not None:
                    return found
                del mapping[sid1]
        return None

    return assign(0, {}, {}, {})


def is_initial_subbundle(b1: Bundle, b2: Bundle) -> bool:
    """Whether b1 embeds into b2 as a downward-closed execution prefix:
    each b1 strand matches a prefix of a distinct b2 strand with identical
    events, and every b1 delivery edge maps to a b2 delivery edge."""
    ids1, ids2 = b1.strand_ids(), b2.strand_ids()

    def assign(i: int, mapping: dict[str, str]) -> bool:
        if i == len(ids1):
            for m, n in b1.comm_edges:
                edge = (NodeRef(mapping[m.strand], m.index), NodeRef(mapping[n.strand], n.index))
                if edge not in b2.comm_edges:
                    return False
            return True
        sid1 = ids1[i]
        h1 = b1.height(sid1)
        t1 = b1.strands[sid1].trace
        for sid2 in ids2:
            if sid2 in mapping.values() or b2.height(sid2) < h1:
                continue
            if b1.strands[sid1].kind != b2.strands[sid2].kind:
                continue
            t2 = b2.strands[sid2].trace
            if all(t1[k] == t2[k] for k in range(h1)):
                mapping[sid1] = sid2
                if assign(i + 1, mapping):
                    return True
                del mapping[sid1]
        return False

    return assign(0, {})


# --- the check -------------------------------------------------------------


@dataclass
class FaithfulnessReport:
    verdict: str  # PASS | FAIL | INCONCLUSIVE
    clause1: list[dict]
    clause2: list[dict]
    witnesses: list[dict]
    counterexamples: list[str]
    bounds: Bounds
    exhausted: bool
    envs: int
    bundles_checked: int
    interpretation: str

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "verdict": self.verdict,
            "bounds": {
                "max_instances_per_role": self.bounds.max_instances_per_role,
                "max_adversary_steps": self.bounds.max_adversary_steps,
                "require_deliver_once": self.bounds.require_deliver_once,
            },
            "envs": self.envs,
            "bundles_checked": self.bundles_checked,
            "exhausted": self.exhausted,
            "clause1": self.clause1,
            "clause2": self.clause2,
            "witnesses": self.witnesses,
            "counterexamples": self.counterexamples,
            "interpretation": self.interpretation,
        }


_INTERPRETATION = (
    "Bounded verdict: clause 1 requires each abstract execution to be the exact "
    "image of an enumerated bundle; clause 2 requires every enumerated bundle to "
    "separate into components whose images are initial sub-bundles of a "
    "substituted abstract execution. Holds only at the stated bounds."
)


def _clause2_entry(
    index: int,
    eb: EnumeratedBundle,
    env_bundles: Sequence[Bundle],
    amap: AbstractionMap,
    key_endpoints: Mapping[str, frozenset[str]],
) -> dict:
    entry: dict = {"bundle": index, "status": "ok", "components": []}
    family = separate(eb.bundle, fingerprints_of(eb))
    if family is None:
        entry["status"] = "no-separation"
        return entry
    for ci, comp in enumerate(family.components):
        image = bundle_image(amap, comp, key_endpoints)
        if image is None:
            entry["status"] = "no-image"
            entry["components"].append({"component": ci, "matched_env": None})
            continue
        if not image.bundle.strands:
            entry["components"].append({"component": ci, "matched_env": None, "empty": True})
            continue
        hit = None
        for ei, env_b in enumerate(env_bundles):
            found = _embed_image_env(image, env_b)
            if found is not None:
                sv, sr = found
                hit = {
                    "component": ci,
                    "matched_env": ei,
                    "substitution": {"values": dict(sorted(sv.items())), "roles": dict(sorted(sr.items()))},
                }
                break
        if hit is None:
            entry["status"] = "no-embedding"
            entry["components"].append({"component": ci, "matched_env": None})
        else:
            entry["components"].append(hit)
    return entry


def check_faithfulness(
    proto: Protocol,
    c: Choreography,
    amap: AbstractionMap,
    bounds: Bounds | None = None,
    jobs: int = 1,
) -> FaithfulnessReport:
    bounds = bounds or Bounds()
    violations = check_static_assumptions(c)
    if violations:
        raise ValueError(f"choreography fails static assumptions: {violations[0]}")

    envs = bundle_semantics(c)
    env_bundles = [strip_markers(e) for e in envs]
    enum = enumerate_bundles(proto, bounds)
    key_endpoints = proto.key_endpoints()

    clause1: list[dict] = []
    witnesses: list[dict] = []
    counterexamples: list[str] = []
    images: dict[int, BundleImage | None] = {}

    def image_of(i: int) -> BundleImage | None:
        if i not in images:
            images[i] = bundle_image(amap, enum.bundles[i].bundle, key_endpoints)
        return images[i]

    clause1_failed = False
    for ei, env_b in enumerate(env_bundles):
        match = None
        for bi in range(len(enum.bundles)):
            image = image_of(bi)
            if image is not None and _match_env_image(env_b, image):
                match = bi
                break
        clause1.append({"env": ei, "matched_bundle": match})
        if match is None:
            clause1_failed = True
            counterexamples.append(
                f"clause 1: abstract execution {ei} is not the image of any enumerated bundle"
            )
        else:
            witnesses.append({"env": ei, "bundle": bundle_to_json(enum.bundles[match].bundle)})

    clause2: list[dict] = []
    if jobs > 1 and len(enum.bundles) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_clause2_entry, i, eb, env_bundles, amap, key_endpoints)
                for i, eb in enumerate(enum.bundles)
            ]
            clause2 = [f.result() for f in futures]
    else:
        clause2 = [
            _clause2_entry(i, eb, env_bundles, amap, key_endpoints)
            for i, eb in enumerate(enum.bundles)
        ]

    clause2_failed = False
    clause2_inconclusive = False
    for entry in clause2:
        if entry["status"] == "no-separation":
            clause2_inconclusive = True
            counterexamples.append(
                f"clause 2: bundle {entry['bundle']} has no fingerprint separation (inconclusive)"
            )
        elif entry["status"] in ("no-image", "no-embedding"):
            clause2_failed = True
            counterexamples.append(
                f"clause 2: bundle {entry['bundle']} has a component with no matching abstract execution"
            )

    if clause1_failed and not enum.exhausted:
        verdict = "FAIL"
    elif clause2_failed:
        verdict = "FAIL"
    elif clause1_failed or clause2_inconclusive or (enum.exhausted and not enum.bundles):
        verdict = "INCONCLUSIVE"
    else:
        verdict = "PASS"

    return FaithfulnessReport(
        verdict=verdict,
        clause1=clause1,
        clause2=clause2,
        witnesses=witnesses,
        counterexamples=counterexamples,
        bounds=bounds,
        exhausted=enum.exhausted,
        envs=len(env_bundles),
        bundles_checked=len(enum.bundles),
        interpretation=_INTERPRETATION,
    )
