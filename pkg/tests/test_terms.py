"""Message terms: construction, matching, attacker closure, rendering."""

import random

import pytest

from chorstrand.terms import (
    Enc,
    Nonce,
    Principal,
    PrivKey,
    PubKey,
    Seq,
    SymKey,
    Tag,
    Value,
    Var,
    derivable,
    enc,
    ground,
    inverse_key,
    saturate,
    seq,
    subterms,
    substitute,
    synthesizable,
    term_matcher,
    term_skeleton,
    term_to_text,
    unify,
    vars_of,
)

A, B = Principal("A"), Principal("B")
NA = Nonce("na")
K = SymKey("k")


def test_seq_flattens_and_singletons_stay_bare():
    assert seq(A) == A
    assert seq(A, seq(B, NA)) == Seq((A, B, NA))
    with pytest.raises(ValueError):
        seq()


def test_seq_rejects_nesting_and_emptiness():
    with pytest.raises(ValueError):
        Seq(())
    with pytest.raises(ValueError):
        Seq((A, Seq((B, NA))))


def test_enc_body_is_always_a_sequence():
    e = enc([A], K)
    assert isinstance(e.body, Seq)
    assert e.body.items == (A,)
    assert enc([seq(A, B), NA], K).body.items == (A, B, NA)


def test_enc_rejects_non_key():
    with pytest.raises(ValueError):
        Enc(Seq((A,)), A)
    with pytest.raises(ValueError):
        enc([A], NA)


def test_ground_and_vars():
    open_term = enc([Tag("t"), Var("x")], Var("k"))
    assert not ground(open_term)
    assert vars_of(open_term) == frozenset({"x", "k"})
    assert ground(substitute(open_term, {"x": NA, "k": K}))
    assert vars_of(A) == frozenset()


def test_subterms_include_key_positions():
    e = enc([NA], PubKey("A"))
    parts = list(subterms(e))
    assert PubKey("A") in parts
    assert NA in parts
    assert e in parts


def test_substitute_rebuilds_sequences():
    t = seq(Var("x"), B)
    assert substitute(t, {"x": seq(A, NA)}) == Seq((A, NA, B))


def test_unify_binds_each_var_to_one_slot():
    pattern = enc([Tag("t"), Var("x"), Var("x")], Var("k"))
    good = enc([Tag("t"), NA, NA], K)
    bad = enc([Tag("t"), NA, B], K)
    assert unify(pattern, good) == {"x": NA, "k": K}
    assert unify(pattern, bad) is None


def test_unify_is_arity_exact():
    pattern = enc([Tag("t"), Var("x")], K)
    assert unify(pattern, enc([Tag("t"), NA, B], K)) is None
    assert unify(seq(Var("x"), Var("y")), seq(A, B, NA)) is None


def test_unify_respects_prior_binding():
    assert unify(Var("x"), NA, {"x": NA}) == {"x": NA}
    assert unify(Var("x"), NA, {"x": B}) is None


def test_inverse_key():
    assert inverse_key(PubKey("A")) == PrivKey("A")
    assert inverse_key(PrivKey("A")) == PubKey("A")
    assert inverse_key(K) == K
    assert inverse_key(NA) is None


# --------------------------------------------------------------------------
# attacker closure, compared against an independent bounded-depth oracle


def _naive_derivable(known: list, goal, depth: int = 6) -> bool:
    """Bounded breadth-first derivability, written without the library's
    saturate/synthesize split: alternate full decomposition with a
    goal-directed composition check."""
    pool = set(known)
    for _ in range(depth):
        new = set()
        for t in pool:
            if isinstance(t, Seq):
                new.update(t.items)
            elif isinstance(t, Enc):
                inv = inverse_key(t.key)
                if inv is not None and _naive_synth(inv, pool, depth):
                    new.update(t.body.items)
        if new <= pool:
            break
        pool |= new
    return _naive_synth(goal, pool, depth)


def _naive_synth(goal, pool, depth: int) -> bool:
    if goal in pool or isinstance(goal, (Principal, Tag, PubKey)):
        return True
    if depth == 0:
        return False
    if isinstance(goal, Seq):
        return all(_naive_synth(item, pool, depth - 1) for item in goal.items)
    if isinstance(goal, Enc):
        return _naive_synth(goal.key, pool, depth - 1) and all(
            _naive_synth(item, pool, depth - 1) for item in goal.body.items
        )
    return False


def test_projection_and_decryption():
    known = [seq(NA, enc([Value("s")], K)), K]
    sat = saturate(known)
    assert NA in sat
    assert Value("s") in sat
    assert derivable(known, seq(Value("s"), NA))


def test_asymmetric_decryption_needs_private_key():
    msg = enc([Value("s")], PubKey("A"))
    assert not derivable([msg], Value("s"))
    assert derivable([msg, PrivKey("A")], Value("s"))


def test_public_basis_is_always_synthesizable():
    assert derivable([], PubKey("Z"))
    assert derivable([], seq(A, Tag("t")))
    assert not derivable([], NA)
    assert not derivable([], PrivKey("Z"))


def test_attacker_can_reencrypt():
    # Learn a nonce under one key, re-emit it under a public key.
    known = [enc([NA], K), K]
    assert derivable(known, enc([NA, A], PubKey("B")))


def test_key_learned_from_traffic_unlocks_earlier_message():
    # The decryption key itself travels under a public key the attacker owns.
    known = [enc([Value("s")], K), enc([K], PubKey("E")), PrivKey("E")]
    assert derivable(known, Value("s"))


def test_closure_agrees_with_naive_oracle():
    rng = random.Random(99)
    atoms = [A, B, NA, Nonce("nb"), K, SymKey("k2"), Value("v"), Tag("t"), PrivKey("A")]

    def random_term(depth: int):
        roll = rng.random()
        if depth == 0 or roll < 0.4:
            return rng.choice(atoms)
        if roll < 0.7:
            return seq(*(random_term(depth - 1) for _ in range(rng.randint(2, 3))))
        key = rng.choice([K, SymKey("k2"), PubKey("A"), PubKey("B")])
        return enc([random_term(depth - 1) for _ in range(rng.randint(1, 2))], key)

    checked_pos = checked_neg = 0
    for _ in range(150):
        known = [random_term(2) for _ in range(rng.randint(1, 4))]
        goal = random_term(2)
        expected = _naive_derivable(known, goal)
        assert derivable(known, goal) == expected, (known, goal)
        checked_pos += expected
        checked_neg += not expected
    assert checked_pos > 20
    assert checked_neg > 20


# --------------------------------------------------------------------------
# rendering and structural comparison


def test_term_to_text_forms():
    assert term_to_text(PubKey("A")) == "pk(A)"
    assert term_to_text(PrivKey("A")) == "sk(A)"
    assert term_to_text(Var("x")) == "?x"
    assert term_to_text(seq(A, NA)) == "A ^ na"
    assert term_to_text(enc([Tag("t"), NA], K)) == "{t na}k"
    assert term_to_text(enc([NA], PubKey("B"))) == "{na}pk(B)"


def test_term_skeleton_hides_renamable_atoms():
    fresh = frozenset({"na", "k"})
    t1 = enc([Tag("t"), NA], K)
    t2 = enc([Tag("t"), Nonce("nz")], SymKey("kz"))
    assert term_skeleton(t1, fresh) == term_skeleton(t2, frozenset({"nz", "kz"}))
    assert term_skeleton(t1, fresh) != term_skeleton(t1, frozenset())


def test_term_matcher_requires_bijective_renaming():
    fresh = frozenset({"na", "nb", "nz"})
    match = term_matcher(fresh)
    fwd: dict = {}
    bwd: dict = {}
    assert match(seq(NA, NA), seq(Nonce("nz"), Nonce("nz")), fwd, bwd)
    taken = {("Nonce", "nb"): ("Nonce", "other")}
    assert not match(NA, Nonce("nb"), {}, taken)
    fwd2: dict = {}
    bwd2: dict = {}
    assert not match(seq(NA, Nonce("nb")), seq(Nonce("nz"), Nonce("nz")), fwd2, bwd2)


def test_term_matcher_keeps_fixed_atoms_fixed():
    match = term_matcher(frozenset({"na"}))
    assert not match(A, B, {}, {})
    assert match(A, A, {}, {})
