"""Labelled transition semantics for choreographies.

A communication term steps once per branch, emitting the branch's label and
continuing with that branch's continuation; the inactive term is stuck.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chor import AbstractMessage, Branch, Choreography, Com, OpLabel, Role, Zero

__all__ = ["LabelMu", "step", "traces", "label_to_text"]


@dataclass(frozen=True)
class LabelMu:
    """One observable communication: sender, receiver, operation, payload."""

    sender: Role
    receiver: Role
    op: OpLabel
    payload: tuple[AbstractMessage, ...]

    def __str__(self) -> str:
        return label_to_text(self)


def _label_of(b: Branch) -> LabelMu:
    return LabelMu(b.sender, b.receiver, b.op, b.payload)


def label_to_text(mu: LabelMu) -> str:
    payload = ",".join(str(m) for m in mu.payload)
    return f"{mu.sender}->{mu.receiver}:{mu.op}<{payload}>"


def step(c: Choreography) -> set[tuple[LabelMu, Choreography]]:
    """All single transitions of c. Zero has none; a sum has one per branch."""
    if isinstance(c, Zero):
        return set()
    return {(_label_of(b), b.continuation) for b in c.branches}


def traces(c: Choreography) -> set[tuple[LabelMu, ...]]:
    """All maximal label sequences, one per root-to-leaf path."""
    if isinstance(c, Zero):
        return {()}
    out: set[tuple[LabelMu, ...]] = set()
    for b in c.branches:
        for rest in traces(b.continuation):
            out.add((_label_of(b),) + rest)
    return out
