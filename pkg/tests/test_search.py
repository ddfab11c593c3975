"""Bounded enumeration of protocol executions with a symbolic attacker."""

import pytest

from chorstrand.protocol import check_deliver_once, load_protocol, parse_protocol
from chorstrand.search import Bounds, adversary_view, enumerate_bundles, secret_kept
from chorstrand.strands import bundle_isomorphic, validate_bundle
from chorstrand.terms import SymKey, Value, term_matcher

from conftest import KBS


@pytest.fixture(scope="module")
def proto(bs_proto_path):
    return load_protocol(bs_proto_path)


@pytest.fixture(scope="module")
def quiet(proto):
    return enumerate_bundles(proto, Bounds(1, 0, True))


@pytest.fixture(scope="module")
def noisy(proto):
    return enumerate_bundles(proto, Bounds(1, 4, True))


def test_quiet_network_has_three_outcomes(quiet):
    assert len(quiet.bundles) == 3
    assert not quiet.exhausted
    assert quiet.filtered_deliver_once == 0


def test_quiet_bundles_are_valid_and_adversary_free(quiet):
    for eb in quiet.bundles:
        assert validate_bundle(eb.bundle) == []
        assert eb.adversary_steps == 0
        kinds = {s.kind for s in eb.bundle.strands.values()}
        assert kinds == {"regular"}


def test_quiet_bundle_shapes(quiet):
    shapes = sorted(
        tuple(sorted((sid, eb.bundle.height(sid)) for sid in eb.bundle.strand_ids()))
        for eb in quiet.bundles
    )
    assert shapes == [
        (("B1", 2), ("C1", 5), ("S1", 7)),
        (("B1", 4), ("C1", 6), ("S1", 10)),
        (("B1", 4), ("C1", 6), ("S1", 10)),
    ]


def test_success_path_matches_hand_wired_bundle(quiet, success_bundle):
    assert any(eb.bundle == success_bundle for eb in quiet.bundles)


def test_quiet_bundles_pairwise_distinct(quiet):
    names = frozenset().union(*(eb.fresh_names() for eb in quiet.bundles))
    match = term_matcher(names)
    for i, left in enumerate(quiet.bundles):
        for right in quiet.bundles[i + 1 :]:
            assert not bundle_isomorphic(left.bundle, right.bundle, match)


def test_fresh_instances_are_recorded(quiet):
    eb = quiet.bundles[0]
    assert {f.template_name for f in eb.fresh} == {"N1", "N2", "Ksc", "Kbs", "Kbc"}
    assert {f.strand for f in eb.fresh} == {"C1", "S1", "B1"}


def test_noisy_network_adds_pollution_variants(noisy):
    assert len(noisy.bundles) == 9
    assert noisy.exhausted
    by_adv = sorted(
        sum(1 for s in eb.bundle.strands.values() if s.kind == "adversary")
        for eb in noisy.bundles
    )
    assert by_adv == [0, 0, 0, 4, 4, 4, 4, 4, 4]
    for eb in noisy.bundles:
        assert validate_bundle(eb.bundle) == []


def test_noisy_bundles_respect_deliver_once(proto, noisy):
    for eb in noisy.bundles:
        for fam in proto.families:
            for inst in eb.instances_of(fam.fresh_name):
                ok, _ = check_deliver_once(eb.bundle, inst)
                assert ok


def test_secrets_survive_quiet_and_noisy_runs(proto, quiet, noisy):
    for result in (quiet, noisy):
        for eb in result.bundles:
            assert secret_kept(eb.bundle, proto, Value("card"))
            assert secret_kept(eb.bundle, proto, Value("receipt"))
            for inst in eb.instances_of("Kbc"):
                assert secret_kept(eb.bundle, proto, inst)


def test_adversary_view_contains_traffic_but_not_secrets(proto, quiet):
    success = max(quiet.bundles, key=lambda eb: len(eb.bundle.nodes))
    view = adversary_view(success.bundle, proto)
    from conftest import P4

    assert P4 in view
    assert Value("card") not in view
    assert SymKey("Kbs.B1") not in view


# --------------------------------------------------------------------------
# replay protocol: a static shared key with no session binding


PING = """
protocol ping
principals A B
tags t
symkeys K
deliver_once NA
role A
  fresh nonce NA
  +{t NA}K. 0
role B
  -{t x}K. 0
"""


def test_replay_excluded_when_deliver_once_required():
    proto = parse_protocol(PING)
    strict = enumerate_bundles(proto, Bounds(2, 1, True))
    relaxed = enumerate_bundles(proto, Bounds(2, 1, False))

    def violating(result):
        out = []
        for eb in result.bundles:
            for inst in eb.instances_of("NA"):
                ok, _ = check_deliver_once(eb.bundle, inst)
                if not ok:
                    out.append(eb)
        return out

    assert violating(strict) == []
    assert strict.filtered_deliver_once >= 1
    replays = violating(relaxed)
    assert replays
    replay = replays[0]
    assert any(s.kind == "adversary" for s in replay.bundle.strands.values())
    assert validate_bundle(replay.bundle) == []


def test_single_instance_ping_is_immediate():
    proto = parse_protocol(PING)
    result = enumerate_bundles(proto, Bounds(1, 0, True))
    assert len(result.bundles) == 1
    (eb,) = result.bundles
    assert eb.bundle.height("A1") == 1
    assert eb.bundle.height("B1") == 1
