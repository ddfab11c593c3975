"""Transition semantics: single steps, maximal traces, label rendering."""

from chorstrand.chor import Zero, parse_choreography
from chorstrand.lts import LabelMu, label_to_text, step, traces


def _texts(trace):
    return [label_to_text(mu) for mu in trace]


def test_inactive_term_is_stuck():
    assert step(Zero()) == set()
    assert traces(Zero()) == {()}


def test_single_step():
    c = parse_choreography("A -> B : hi<x>. 0")
    ((mu, cont),) = step(c)
    assert mu == LabelMu("A", "B", "hi", c.branches[0].payload)
    assert cont == Zero()


def test_sum_steps_once_per_branch():
    c = parse_choreography("( A -> B : l<>. B -> A : back<>. 0 + A -> B : r<>. 0 )")
    outcomes = {label_to_text(mu): cont for mu, cont in step(c)}
    assert set(outcomes) == {"A->B:l<>", "A->B:r<>"}
    assert outcomes["A->B:r<>"] == Zero()
    assert step(outcomes["A->B:l<>"]) != set()


def test_label_rendering():
    c = parse_choreography("A -> B : give<v,box[w]{A,C}>. 0")
    ((mu, _),) = step(c)
    assert label_to_text(mu) == "A->B:give<v,box[w]{A,C}>"
    assert str(mu) == label_to_text(mu)


def test_buyer_seller_traces(bs_chor):
    # Walked by hand off the choreography text: the protocol either runs to
    # a receipt, to a failed-payment notice, or stops at a refusal.
    got = {tuple(_texts(t)) for t in traces(bs_chor)}
    success = (
        "C->S:req<prod>",
        "S->C:reply<quote>",
        "C->S:ok<box[card]{C,B}>",
        "S->B:pay<box[card]{C,B}>",
        "B->S:okcf<box[receipt]{B,C}>",
        "S->C:rcpt<box[receipt]{B,C}>",
    )
    nopay = (
        "C->S:req<prod>",
        "S->C:reply<quote>",
        "C->S:ok<box[card]{C,B}>",
        "S->B:pay<box[card]{C,B}>",
        "B->S:nopaycf<>",
        "S->C:nopay<>",
    )
    refuse = (
        "C->S:req<prod>",
        "S->C:reply<quote>",
        "C->S:refuse<reason>",
    )
    assert got == {success, nopay, refuse}
    assert sorted(len(t) for t in got) == [3, 6, 6]


def test_traces_agree_with_iterated_step(bs_chor):
    def unroll(c):
        succ = step(c)
        if not succ:
            return {()}
        return {(mu,) + rest for mu, cont in succ for rest in unroll(cont)}

    assert unroll(bs_chor) == traces(bs_chor)
