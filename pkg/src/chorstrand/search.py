"""Bounded enumeration of protocol executions as valid bundles.

The search instantiates every role a fixed number of times, then drives the
instances forward.  Transmissions fire eagerly; the only branch points are
internal choices (a role picking between transmissions), the wiring of each
pending reception (every matching transmitted copy, every message the
adversary can build within budget, or freezing the reception so a competitor
can take the copy), and nothing else.  A state is emitted once nothing can
fire: the result is a maximal execution, kept when at least one regular
strand ran to completion.

Adversary actions are materialized as single-step strands: joining a
sequence, separating one, encrypting, decrypting, originating a public basis
term, or duplicating a transmitted message.  Each strand costs one unit of
the adversary budget.  Injections are goal-directed: messages are only built
to feed a pending reception.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .protocol import Protocol, RoleScript, ScriptChoice, ScriptEnd, ScriptNode, ScriptStep, canonical_params, check_deliver_once, rename_fresh
from .strands import Bundle, DirectedTerm, Edge, NodeRef, Strand, bundle_isomorphic, iso_signature, make_bundle, validate_bundle
from .terms import (
    Enc,
    Nonce,
    Seq,
    SymKey,
    Term,
    enc,
    ground,
    inverse_key,
    saturate,
    seq,
    substitute,
    subterms,
    term_matcher,
    term_skeleton,
    term_to_text,
    unify,
)

__all__ = [
    "Bounds",
    "FreshInstance",
    "EnumeratedBundle",
    "EnumerationResult",
    "enumerate_bundles",
    "adversary_view",
    "secret_kept",
]

_GEN_CAP = 512


@dataclass(frozen=True)
class Bounds:
    max_instances_per_role: int = 1
    max_adversary_steps: int = 0
    require_deliver_once: bool = True


@dataclass(frozen=True)
class FreshInstance:
    """A per-instance fresh value: renamed copy of a template's fresh name."""

    name: str
    kind: str  # "nonce" or "key"
    template_name: str
    strand: str

    def term(self) -> Term:
        return Nonce(self.name) if self.kind == "nonce" else SymKey(self.name)


@dataclass(frozen=True)
class EnumeratedBundle:
    bundle: Bundle
    fresh: tuple[FreshInstance, ...]
    adversary_steps: int

    def fresh_names(self) -> frozenset[str]:
        return frozenset(f.name for f in self.fresh)

    def instances_of(self, template_name: str) -> list[Term]:
        return [f.term() for f in self.fresh if f.template_name == template_name]


@dataclass
class EnumerationResult:
    bundles: list[EnumeratedBundle]
    exhausted: bool
    states_explored: int
    filtered_deliver_once: int


class _Traffic:
    __slots__ = ("msg", "node", "copies")

    def __init__(self, msg: Term, node: NodeRef, copies: int) -> None:
        self.msg = msg
        self.node = node
        self.copies = copies


class _Run:
    __slots__ = ("sid", "role", "node", "binding", "events", "frozen")

    def __init__(self, sid: str, role: str, node: ScriptNode, binding: dict[str, Term]) -> None:
        self.sid = sid
        self.role = role
        self.node = node
        self.binding = binding
        self.events: list[DirectedTerm] = []
        self.frozen = False

    def clone(self) -> "_Run":
        c = _Run(self.sid, self.role, self.node, dict(self.binding))
        c.events = list(self.events)
        c.frozen = self.frozen
        return c

    @property
    def complete(self) -> bool:
        return isinstance(self.node, ScriptEnd)


class _State:
    __slots__ = ("runs", "traffic", "comm", "adv", "budget", "adv_count")

    def __init__(self, runs, traffic, comm, adv, budget, adv_count) -> None:
        self.runs: list[_Run] = runs
        self.traffic: list[_Traffic] = traffic
        self.comm: list[Edge] = comm
        self.adv: list[Strand] = adv
        self.budget: int = budget
        self.adv_count: int = adv_count

    def clone(self) -> "_State":
        return _State(
            [r.clone() for r in self.runs],
            [_Traffic(t.msg, t.node, t.copies) for t in self.traffic],
            list(self.comm),
            list(self.adv),
            self.budget,
            self.adv_count,
        )

    def producers(self) -> dict[Term, NodeRef]:
        """A transmission node for every message ever put on the wire,
        adversary outputs included."""
        out: dict[Term, NodeRef] = {}
        for t in self.traffic:
            out.setdefault(t.msg, t.node)
        for s in self.adv:
            for i, ev in enumerate(s.trace, start=1):
                if ev.direction == "+":
                    out.setdefault(ev.msg, NodeRef(s.id, i))
        return out


def _map_script(node: ScriptNode, fn) -> ScriptNode:
    if isinstance(node, ScriptEnd):
        return node
    if isinstance(node, ScriptStep):
        return ScriptStep(DirectedTerm(node.event.direction, fn(node.event.msg)), _map_script(node.cont, fn))
    return ScriptChoice(tuple(_map_script(o, fn) for o in node.options))


def _reception_options(node: ScriptNode) -> list[ScriptStep]:
    if isinstance(node, ScriptStep) and node.event.direction == "-":
        return [node]
    if isinstance(node, ScriptChoice):
        return [o for o in node.options if isinstance(o, ScriptStep) and o.event.direction == "-"]
    return []


def _actionable_options(node: ScriptNode) -> list[ScriptNode]:
    """Transmission or end options that a run can take on its own."""
    if isinstance(node, ScriptChoice):
        return [
            o
            for o in node.options
            if isinstance(o, ScriptEnd) or (isinstance(o, ScriptStep) and o.event.direction == "+")
        ]
    return []


@dataclass(frozen=True)
class _AdvStep:
    kind: str  # pair | sep | enc | dec | origin | dup
    term: Term

    def inputs(self) -> tuple[Term, ...]:
        if self.kind == "pair":
            assert isinstance(self.term, Seq)
            return self.term.items
        if self.kind == "sep":
            return (self.term,)
        if self.kind == "enc":
            assert isinstance(self.term, Enc)
            return (self.term.body, self.term.key)
        if self.kind == "dec":
            assert isinstance(self.term, Enc)
            inv = inverse_key(self.term.key)
            assert inv is not None
            return (self.term, inv)
        if self.kind == "dup":
            return (self.term,)
        return ()

    def outputs(self) -> tuple[Term, ...]:
        if self.kind == "sep":
            assert isinstance(self.term, Seq)
            return self.term.items
        if self.kind == "dec":
            assert isinstance(self.term, Enc)
            return (self.term.body,)
        return (self.term,)

    def trace(self) -> tuple[DirectedTerm, ...]:
        return tuple(DirectedTerm("-", t) for t in self.inputs()) + tuple(
            DirectedTerm("+", t) for t in self.outputs()
        )


class _Planner:
    """Minimal adversary derivations over the current wire contents.

    free terms cost nothing (their transmission nodes can be tapped);
    everything else is built by recursion over structure, by analyzing a
    free container, or by originating a basis term.  The plan is a set of
    steps; shared intermediates are materialized once.
    """

    def __init__(self, free: set[Term], basis: set[Term]) -> None:
        self.free = free
        self.basis = basis
        self.containers = self._index_containers()
        self.memo: dict[Term, frozenset[_AdvStep] | None] = {}
        self.analyzed = saturate(free | basis)

    def _index_containers(self) -> dict[Term, list[Term]]:
        idx: dict[Term, list[Term]] = {}
        seen: set[Term] = set()

        def add(t: Term) -> None:
            if t in seen:
                return
            seen.add(t)
            if isinstance(t, Seq):
                for item in t.items:
                    idx.setdefault(item, []).append(t)
                    add(item)
            elif isinstance(t, Enc):
                idx.setdefault(t.body, []).append(t)
                add(t.body)

        for t in self.free:
            add(t)
        return idx

    def plan(self, goal: Term, active: frozenset[Term] = frozenset()) -> frozenset[_AdvStep] | None:
        if goal in self.free:
            return frozenset()
        if goal in self.memo:
            return self.memo[goal]
        if goal in active:
            return None
        active = active | {goal}
        options: list[frozenset[_AdvStep]] = []
        if goal in self.basis:
            options.append(frozenset([_AdvStep("origin", goal)]))
        if isinstance(goal, Seq):
            parts = [self.plan(i, active) for i in goal.items]
            if all(p is not None for p in parts):
                merged: frozenset[_AdvStep] = frozenset().union(*parts)  # type: ignore[arg-type]
                options.append(merged | {_AdvStep("pair", goal)})
        if isinstance(goal, Enc):
            body = self.plan(goal.body, active)
            key = self.plan(goal.key, active)
            if body is not None and key is not None:
                options.append(body | key | {_AdvStep("enc", goal)})
        for container in self.containers.get(goal, []):
            if isinstance(container, Seq):
                base = self.plan(container, active)
                if base is not None:
                    options.append(base | {_AdvStep("sep", container)})
            elif isinstance(container, Enc):
                inv = inverse_key(container.key)
                if inv is None:
                    continue
                outer = self.plan(container, active)
                keyplan = self.plan(inv, active)
                if outer is not None and keyplan is not None:
                    options.append(outer | keyplan | {_AdvStep("dec", container)})
        result = min(options, key=len) if options else None
        if result is not None or not (active - {goal}):
            self.memo[goal] = result
        return result

    def injection_plan(self, goal: Term) -> frozenset[_AdvStep] | None:
        """Plan for delivering goal to a regular reception: a message already
        on the wire needs an explicit duplication step for its new copy."""
        if goal in self.free:
            return frozenset([_AdvStep("dup", goal)])
        return self.plan(goal)


def _candidate_messages(pattern: Term, pool: list[Term], cap: list[int], memo: dict[Term, list[Term]]) -> list[Term]:
    """Ground instances of pattern the adversary might assemble: pool terms
    that unify with it, or structural combinations of candidates for its
    parts."""
    if pattern in memo:
        return memo[pattern]
    found: list[Term] = []
    seen: set[Term] = set()

    def add(t: Term) -> None:
        if t not in seen and len(found) < cap[0]:
            seen.add(t)
            found.append(t)

    if ground(pattern):
        add(pattern)
    else:
        for u in pool:
            if unify(pattern, u) is not None:
                add(u)
        if isinstance(pattern, Seq):
            parts = [_candidate_messages(i, pool, cap, memo) for i in pattern.items]
            for combo in itertools.product(*parts):
                try:
                    add(seq(*combo))
                except ValueError:
                    continue
                if len(found) >= cap[0]:
                    break
        elif isinstance(pattern, Enc):
            parts = [_candidate_messages(i, pool, cap, memo) for i in pattern.body.items]
            keys = _candidate_messages(pattern.key, pool, cap, memo)
            for combo in itertools.product(*parts, keys):
                try:
                    add(enc(list(combo[:-1]), combo[-1]))
                except ValueError:
                    continue
                if len(found) >= cap[0]:
                    break
    memo[pattern] = found
    return found


class _Enumerator:
    def __init__(self, proto: Protocol, bounds: Bounds) -> None:
        self.proto = proto
        self.bounds = bounds
        self.basis = set(proto.basis_terms())
        self.exhausted = False
        self.states = 0
        self.filtered = 0
        self.emitted: list[EnumeratedBundle] = []
        self.signatures: dict[object, list[int]] = {}
        self.fresh: list[FreshInstance] = []

    # -- setup ---------------------------------------------------------

    def initial_state(self) -> _State:
        runs: list[_Run] = []
        for role in sorted(self.proto.scripts):
            script = self.proto.scripts[role]
            for k in range(1, self.bounds.max_instances_per_role + 1):
                sid = f"{role}{k}"
                renaming = {n: f"{n}.{sid}" for n in script.fresh_names}
                for n in script.fresh_nonces:
                    self.fresh.append(FreshInstance(renaming[n], "nonce", n, sid))
                for n in script.fresh_keys:
                    self.fresh.append(FreshInstance(renaming[n], "key", n, sid))
                node = _map_script(script.body, lambda t, r=renaming: rename_fresh(t, r))
                binding = dict(canonical_params(script))
                runs.append(_Run(sid, role, node, binding))
        return _State(runs, [], [], [], self.bounds.max_adversary_steps, 0)

    # -- driving -------------------------------------------------------

    def explore(self, state: _State) -> None:
        self.states += 1
        while True:
            self._fire_transmissions(state)
            chooser = next(
                (r for r in state.runs if not r.frozen and _actionable_options(r.node)),
                None,
            )
            if chooser is None:
                break
            takeable = _actionable_options(chooser.node)
            residual = _reception_options(chooser.node)
            for option in takeable:
                child = state.clone()
                crun = next(r for r in child.runs if r.sid == chooser.sid)
                crun.node = option
                self.explore(child)
            if residual:
                child = state.clone()
                crun = next(r for r in child.runs if r.sid == chooser.sid)
                crun.node = ScriptChoice(tuple(residual)) if len(residual) > 1 else residual[0]
                self.explore(child)
            return

        for run in state.runs:
            if run.frozen or run.complete:
                continue
            options = _reception_options(run.node)
            if not options:
                continue
            children = self._delivery_children(state, run, options)
            if children:
                for child in children:
                    self.explore(child)
                frozen = state.clone()
                next(r for r in frozen.runs if r.sid == run.sid).frozen = True
                self.explore(frozen)
                return
        self._emit(state)

    def _fire_transmissions(self, state: _State) -> None:
        progressed = True
        while progressed:
            progressed = False
            for run in state.runs:
                if run.frozen:
                    continue
                node = run.node
                if isinstance(node, ScriptStep) and node.event.direction == "+":
                    msg = substitute(node.event.msg, run.binding)
                    if not ground(msg):
                        raise RuntimeError(f"transmission with unbound variable on {run.sid}")
                    run.events.append(DirectedTerm("+", msg))
                    state.traffic.append(_Traffic(msg, NodeRef(run.sid, len(run.events)), 1))
                    run.node = node.cont
                    progressed = True

    def _delivery_children(self, state: _State, run: _Run, options: list[ScriptStep]) -> list[_State]:
        children: list[tuple[str, _State]] = []
        bound_patterns = [(opt, substitute(opt.event.msg, run.binding)) for opt in options]

        direct_msgs: set[Term] = set()
        for idx, item in enumerate(state.traffic):
            if item.copies <= 0:
                continue
            for opt, pattern in bound_patterns:
                theta = unify(pattern, item.msg)
                if theta is None:
                    continue
                direct_msgs.add(item.msg)
                child = state.clone()
                child.traffic[idx].copies -= 1
                self._deliver(child, run.sid, opt, item.msg, theta, child.traffic[idx].node)
                children.append((f"d:{idx}:{term_to_text(pattern)}", child))

        if state.budget > 0:
            planner = _Planner(set(state.producers()), self.basis)
            pool = sorted(planner.analyzed, key=term_to_text)
            cap = [_GEN_CAP]
            memo: dict[Term, list[Term]] = {}
            synth: list[tuple[Term, ScriptStep, dict[str, Term], frozenset[_AdvStep]]] = []
            for opt, pattern in bound_patterns:
                for m in _candidate_messages(pattern, pool, cap, memo):
                    if m in direct_msgs:
                        continue
                    theta = unify(pattern, m)
                    if theta is None or not ground(m):
                        continue
                    plan = planner.injection_plan(m)
                    if plan is None:
                        continue
                    if len(plan) > state.budget:
                        self.exhausted = True
                        continue
                    synth.append((m, opt, theta, plan))
            if any(len(v) >= _GEN_CAP for v in memo.values()):
                self.exhausted = True
            synth.sort(key=lambda e: (term_to_text(e[0]), len(e[3])))
            seen_m: set[Term] = set()
            for m, opt, theta, plan in synth:
                if m in seen_m:
                    continue
                seen_m.add(m)
                child = state.clone()
                source = self._materialize(child, plan, m)
                self._deliver(child, run.sid, opt, m, theta, source)
                children.append((f"i:{term_to_text(m)}", child))

        children.sort(key=lambda e: e[0])
        return [c for _, c in children]

    def _deliver(self, state: _State, sid: str, opt: ScriptStep, msg: Term, theta: Mapping[str, Term], source: NodeRef) -> None:
        run = next(r for r in state.runs if r.sid == sid)
        run.events.append(DirectedTerm("-", msg))
        run.binding.update(theta)
        run.node = opt.cont
        state.comm.append((source, NodeRef(run.sid, len(run.events))))

    def _materialize(self, state: _State, plan: frozenset[_AdvStep], goal: Term) -> NodeRef:
        """Append the plan's adversary strands to the state; returns the node
        transmitting the goal message."""
        producers = state.producers()
        pending = sorted(plan, key=lambda s: (s.kind, term_to_text(s.term)))
        goal_node: NodeRef | None = None
        while pending:
            ready = [s for s in pending if all(i in producers for i in s.inputs())]
            if not ready:
                raise RuntimeError("adversary plan is not well founded")
            step = ready[0]
            pending.remove(step)
            state.adv_count += 1
            state.budget -= 1
            sid = f"adv{state.adv_count}"
            strand = Strand(sid, step.trace(), "adversary")
            state.adv.append(strand)
            index = 0
            for t in step.inputs():
                index += 1
                state.comm.append((producers[t], NodeRef(sid, index)))
            for t in step.outputs():
                index += 1
                producers[t] = NodeRef(sid, index)
                if t == goal:
                    goal_node = NodeRef(sid, index)
        if goal_node is None:
            goal_node = producers.get(goal)
        if goal_node is None:
            raise RuntimeError("adversary plan does not produce the goal")
        return goal_node

    # -- emission ------------------------------------------------------

    def _emit(self, state: _State) -> None:
        if not any(r.complete and r.events for r in state.runs):
            return
        for run in state.runs:
            if not run.frozen:
                continue
            for opt in _reception_options(run.node):
                pattern = substitute(opt.event.msg, run.binding)
                if any(t.copies > 0 and unify(pattern, t.msg) is not None for t in state.traffic):
                    return

        strands: dict[str, Strand] = {}
        for run in state.runs:
            if run.events:
                strands[run.sid] = Strand(run.sid, tuple(run.events), "regular")
        for s in state.adv:
            strands[s.id] = s
        used = set(strands)
        comm = tuple((a, b) for a, b in state.comm if a.strand in used and b.strand in used)
        bundle = make_bundle(strands.values(), comm_edges=comm)
        problems = validate_bundle(bundle)
        if problems:
            raise RuntimeError(f"enumerator produced an invalid bundle: {problems[0]}")

        fresh = tuple(
            f
            for f in self.fresh
            if f.strand in used and any(f.term() in subterms(ev.msg) for ev in strands[f.strand].trace)
        )
        if self.bounds.require_deliver_once:
            family_names = {spec.fresh_name for spec in self.proto.families}
            for f in fresh:
                if f.template_name not in family_names:
                    continue
                ok, _ = check_deliver_once(bundle, f.term())
                if not ok:
                    self.filtered += 1
                    return
        record = EnumeratedBundle(bundle, fresh, len(state.adv))
        names = record.fresh_names()
        sig = iso_signature(bundle, lambda m: term_skeleton(m, names))
        bucket = self.signatures.setdefault(sig, [])
        for idx in bucket:
            other = self.emitted[idx]
            matcher = term_matcher(names | other.fresh_names())
            if bundle_isomorphic(bundle, other.bundle, matcher):
                return
        bucket.append(len(self.emitted))
        self.emitted.append(record)

    def run(self) -> EnumerationResult:
        self.explore(self.initial_state())
        return EnumerationResult(self.emitted, self.exhausted, self.states, self.filtered)


def enumerate_bundles(proto: Protocol, bounds: Bounds | None = None) -> EnumerationResult:
    """All maximal executions of the protocol within the bounds, up to
    isomorphism, each containing at least one complete regular strand."""
    enumerator = _Enumerator(proto, bounds or Bounds())
    return enumerator.run()


def adversary_view(bundle: Bundle, proto: Protocol) -> set[Term]:
    """Everything the adversary can analyze out of a bundle's traffic."""
    visible = {ev.msg for n, ev in ((n, bundle.event(n)) for n in bundle.nodes) if ev.direction == "+"}
    return saturate(visible | set(proto.basis_terms()))


def secret_kept(bundle: Bundle, proto: Protocol, goal: Term) -> bool:
    """True iff the adversary cannot derive goal from the bundle's traffic."""
    from .terms import synthesizable

    return not synthesizable(goal, adversary_view(bundle, proto))
