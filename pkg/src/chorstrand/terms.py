"""Cryptographic message terms and adversary derivability.

Terms are values, nonces, symmetric keys, key pairs named by principal,
principals, protocol tags, flat sequences, encryptions, and pattern
variables.  Sequences never nest directly (building one flattens), and an
encryption's body is always a sequence, so arity is part of a unit's shape.

Derivability is the usual two-phase closure: saturate the known set under
projection and decryption-with-derivable-inverse, then synthesize the goal
from the saturated set, sequence and encryption construction, and the public
basis (principals, tags, public keys).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, TypeAlias

__all__ = [
    "Value",
    "Nonce",
    "SymKey",
    "PubKey",
    "PrivKey",
    "Principal",
    "Tag",
    "Seq",
    "Enc",
    "Var",
    "Term",
    "seq",
    "enc",
    "ground",
    "vars_of",
    "subterms",
    "substitute",
    "unify",
    "inverse_key",
    "saturate",
    "synthesizable",
    "derivable",
    "term_to_text",
    "term_skeleton",
    "term_matcher",
]


@dataclass(frozen=True)
class Value:
    token: str


@dataclass(frozen=True)
class Nonce:
    name: str


@dataclass(frozen=True)
class SymKey:
    name: str


@dataclass(frozen=True)
class PubKey:
    of: str


@dataclass(frozen=True)
class PrivKey:
    of: str


@dataclass(frozen=True)
class Principal:
    name: str


@dataclass(frozen=True)
class Tag:
    token: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Seq:
    items: tuple["Term", ...]

    def __post_init__(self) -> None:
        if len(self.items) < 1:
            raise ValueError("a sequence needs at least one item")
        if any(isinstance(t, Seq) for t in self.items):
            raise ValueError("sequences do not nest; build them with seq()")


_KEY_KINDS = (PubKey, PrivKey, SymKey, Var)


@dataclass(frozen=True)
class Enc:
    body: Seq
    key: "Term"

    def __post_init__(self) -> None:
        if not isinstance(self.body, Seq):
            raise ValueError("encryption body must be a sequence")
        if not isinstance(self.key, _KEY_KINDS):
            raise ValueError(f"cannot encrypt under {type(self.key).__name__}")


Term: TypeAlias = "Value | Nonce | SymKey | PubKey | PrivKey | Principal | Tag | Seq | Enc | Var"


def seq(*items: Term) -> Term:
    """Flatten into a canonical sequence; a single item stays bare."""
    flat: list[Term] = []
    for t in items:
        if isinstance(t, Seq):
            flat.extend(t.items)
        else:
            flat.append(t)
    if not flat:
        raise ValueError("empty sequence")
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def enc(items: Iterable[Term], key: Term) -> Enc:
    """Encrypt the given items (body kept as a sequence even when singular)."""
    flat: list[Term] = []
    for t in items:
        if isinstance(t, Seq):
            flat.extend(t.items)
        else:
            flat.append(t)
    return Enc(Seq(tuple(flat)), key)


def ground(t: Term) -> bool:
    return not any(isinstance(s, Var) for s in subterms(t))


def vars_of(t: Term) -> frozenset[str]:
    return frozenset(s.name for s in subterms(t) if isinstance(s, Var))


def subterms(t: Term) -> Iterator[Term]:
    """t and every structural part of it, including encryption keys."""
    yield t
    if isinstance(t, Seq):
        for item in t.items:
            yield from subterms(item)
    elif isinstance(t, Enc):
        yield from subterms(t.body)
        yield from subterms(t.key)


def substitute(t: Term, binding: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        return binding.get(t.name, t)
    if isinstance(t, Seq):
        return seq(*(substitute(item, binding) for item in t.items))
    if isinstance(t, Enc):
        body = [substitute(item, binding) for item in t.body.items]
        return enc(body, substitute(t.key, binding))
    return t


def unify(pattern: Term, value: Term, binding: Mapping[str, Term] | None = None) -> dict[str, Term] | None:
    """Match pattern against a term, extending binding; None when impossible.

    Variables bind one position each: a sequence pattern only matches a
    sequence of the same length, so arity mismatches never unify.
    """
    out = dict(binding) if binding else {}

    def go(p: Term, v: Term) -> bool:
        if isinstance(p, Var):
            if p.name in out:
                return out[p.name] == v
            out[p.name] = v
            return True
        if isinstance(p, Seq):
            return isinstance(v, Seq) and len(p.items) == len(v.items) and all(
                go(pi, vi) for pi, vi in zip(p.items, v.items)
            )
        if isinstance(p, Enc):
            return isinstance(v, Enc) and go(p.body, v.body) and go(p.key, v.key)
        return p == v

    return out if go(pattern, value) else None


def inverse_key(key: Term) -> Term | None:
    if isinstance(key, PubKey):
        return PrivKey(key.of)
    if isinstance(key, PrivKey):
        return PubKey(key.of)
    if isinstance(key, SymKey):
        return key
    return None


def _in_basis(t: Term) -> bool:
    return isinstance(t, (Principal, Tag, PubKey))


def synthesizable(goal: Term, saturated: frozenset[Term]) -> bool:
    """Can goal be built from a saturated knowledge set and the public basis?"""

    def synth(t: Term, pending: frozenset[Term]) -> bool:
        if t in saturated or _in_basis(t):
            return True
        if t in pending:
            return False
        pending = pending | {t}
        if isinstance(t, Seq):
            return all(synth(item, pending) for item in t.items)
        if isinstance(t, Enc):
            return all(synth(item, pending) for item in t.body.items) and synth(t.key, pending)
        return False

    return synth(goal, frozenset())


def saturate(known: Iterable[Term]) -> frozenset[Term]:
    """Close the known set under projection and feasible decryption."""
    k: set[Term] = set(known)
    changed = True
    while changed:
        changed = False
        frozen = frozenset(k)
        for t in list(k):
            if isinstance(t, Seq):
                for item in t.items:
                    if item not in k:
                        k.add(item)
                        changed = True
            elif isinstance(t, Enc):
                inv = inverse_key(t.key)
                if inv is not None and synthesizable(inv, frozen):
                    for item in t.body.items:
                        if item not in k:
                            k.add(item)
                            changed = True
    return frozenset(k)


def derivable(known: Iterable[Term], goal: Term) -> bool:
    """Dolev-Yao derivability of goal from the known messages."""
    return synthesizable(goal, saturate(known))


# --- text and comparison helpers ------------------------------------------


def term_to_text(t: Term) -> str:
    if isinstance(t, (Value, Nonce, SymKey, Principal, Tag)):
        return t.token if isinstance(t, (Value, Tag)) else t.name
    if isinstance(t, PubKey):
        return f"pk({t.of})"
    if isinstance(t, PrivKey):
        return f"sk({t.of})"
    if isinstance(t, Var):
        return f"?{t.name}"
    if isinstance(t, Seq):
        return " ^ ".join(_item_text(item) for item in t.items)
    if isinstance(t, Enc):
        inner = " ".join(_item_text(item) for item in t.body.items)
        return "{" + inner + "}" + term_to_text(t.key)
    raise TypeError(f"not a term: {t!r}")


def _item_text(t: Term) -> str:
    text = term_to_text(t)
    return f"({text})" if isinstance(t, Seq) else text


def term_skeleton(t: Term, renamable: frozenset[str] = frozenset()) -> object:
    """Hashable shape with the given nonce/symkey names wildcarded."""
    if isinstance(t, (Nonce, SymKey)):
        kind = "nonce" if isinstance(t, Nonce) else "symkey"
        name = "*" if t.name in renamable else t.name
        return (kind, name)
    if isinstance(t, Seq):
        return ("seq", tuple(term_skeleton(i, renamable) for i in t.items))
    if isinstance(t, Enc):
        return ("enc", term_skeleton(t.body, renamable), term_skeleton(t.key, renamable))
    return ("atom", term_to_text(t))


def term_matcher(renamable: frozenset[str]) -> Callable[[object, object, dict, dict], bool]:
    """Structural equality up to a bijective renaming of the given fresh names."""

    def bind(fwd: dict, bwd: dict, a: object, b: object) -> bool:
        if a in fwd:
            return fwd[a] == b
        if b in bwd:
            return False
        fwd[a] = b
        bwd[b] = a
        return True

    def match(t1: object, t2: object, fwd: dict, bwd: dict) -> bool:
        if isinstance(t1, (Nonce, SymKey)) and type(t1) is type(t2):
            r1, r2 = t1.name in renamable, t2.name in renamable
            if r1 != r2:
                return False
            if r1:
                kind = type(t1).__name__
                return bind(fwd, bwd, (kind, t1.name), (kind, t2.name))
            return t1 == t2
        if isinstance(t1, Seq) and isinstance(t2, Seq):
            return len(t1.items) == len(t2.items) and all(
                match(a, b, fwd, bwd) for a, b in zip(t1.items, t2.items)
            )
        if isinstance(t1, Enc) and isinstance(t2, Enc):
            return match(t1.body, t2.body, fwd, bwd) and match(t1.key, t2.key, fwd, bwd)
        return t1 == t2

    return match
