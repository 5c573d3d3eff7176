import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helo import elo
from helo.ckks import scheme as S
from helo.protocol import SP, HElo, ProtocolConfig, ProtocolError, user_ids
from helo.protocol.messages import (KC, Network, RoutingError, decode_fields, encode_fields, f64, text, un_f64,
                                    user_role)
from helo.protocol.roles import sample_registration_noise

LADDER = elo.RankLadder.load()
TOL = 1e-3


def system(seed=0, **cfg):
    h = HElo(ProtocolConfig(**cfg), LADDER, seed)
    h.init()
    return h


def populate(h, ratings):
    """Register users at exact ratings (no noise) and return their ids."""
    ids = user_ids(len(ratings))
    for uid, r in zip(ids, ratings):
        assert h.register(uid, r, noise=0)
    return ids


# -- framing and routing -----------------------------------------------------------------

def test_message_framing_round_trip():
    fields = {"a": b"", "b": b"\x00" * 300, "rating": f64(1234.5)}
    kind, back = decode_fields(encode_fields("announce", fields))
    assert kind == "announce" and back == fields
    assert un_f64(back["rating"]) == 1234.5
    with pytest.raises(ValueError):
        decode_fields(encode_fields("x", fields) + b"!")


def test_private_message_types_never_reach_sp():
    net = Network()
    with pytest.raises(RoutingError):
        net.send(KC, SP, "announcement", {"rating": f64(1.0)})
    with pytest.raises(RoutingError):
        net.send(user_role("u"), SP, "attest_request", {})
    net.send(KC, user_role("u"), "announcement", {"rating": f64(1.0)})
    assert net.pending(user_role("u")) == 1


def test_trace_holds_metadata_only():
    net = Network()
    net.send(user_role("u"), SP, "register", {"user": text("u"), "ct": b"\x01" * 64})
    (entry,) = net.trace
    assert set(entry) == {"seq", "t", "role", "to", "type", "bytes"}


def test_receive_checks_the_expected_type():
    net = Network()
    with pytest.raises(RoutingError):
        net.receive(SP)
    net.send(user_role("u"), SP, "register", {})
    with pytest.raises(RoutingError):
        net.receive(SP, "verify_new")


def test_init_runs_once():
    h = system()
    with pytest.raises(ProtocolError):
        h.init()
    with pytest.raises(ProtocolError):
        HElo(ProtocolConfig(), LADDER, 0).new_user("u")


def test_config_validation():
    with pytest.raises(elo.EloError):
        ProtocolConfig(matches=2)
    with pytest.raises(ValueError):
        ProtocolConfig(mode="lazy")


# -- registration ------------------------------------------------------------------------

def test_honest_registration():
    h = system()
    assert h.register("alice", 1200.0)
    rec = h.sp.records["alice"]
    assert rec.rank == LADDER.rank(1200.0) and rec.cnt == 1
    assert abs(h.decrypt_for_test("alice") - h.users["alice"].rating) < TOL
    assert abs(h.users["alice"].rating - 1200.0) <= 50


def test_register_twice_refused():
    h = system()
    assert h.register("alice", 1200.0)
    user = h.users["alice"]
    commitment, ct, proof, _ = user.prove_rating(user.rating, user.rank)
    h.net.send(user.role, SP, "register", {"user": text("alice"), "rank": text(user.rank), "commitment": commitment,
                                           "ct": ct, "proof": proof})
    h.sp.handle()
    user.handle()
    assert user.last_refusal == "already registered"


def test_lying_about_the_band_is_refused():
    h = system()
    user = h.new_user("mallory")
    user.rating = 1200.0
    high = LADDER.rank(1700.0)
    commitment, ct, proof, _ = user.prove_rating(1200.0, high, check=False)
    h.net.send(user.role, SP, "register", {"user": text("mallory"), "rank": text(high), "commitment": commitment,
                                           "ct": ct, "proof": proof})
    h.sp.handle()
    user.handle()
    assert "mallory" not in h.sp.records
    assert user.last_refusal == "range proof rejected"


def test_noise_that_leaves_the_band_is_refused_locally():
    h = system()
    h.new_user("edge")
    with pytest.raises(ProtocolError):
        h.register("edge", 1490.0, noise=20)
    with pytest.raises(ProtocolError):
        h.register("edge", 1600.0, rank=LADDER.rank(1200.0))
    assert "edge" not in h.sp.records


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 3999.0), st.integers(0, 400), st.integers(0, 2 ** 32))
def test_noise_keeps_rating_in_band(r, amplitude, seed):
    band = LADDER.band(r)
    rng = np.random.default_rng(seed)
    for _ in range(200):
        a = sample_registration_noise(r, band, amplitude, rng)
        assert -amplitude <= a <= amplitude
        assert band.contains(r + a)


def test_noise_over_ten_thousand_draws():
    band = LADDER.band(1010.0)
    rng = np.random.default_rng(5)
    draws = np.array([sample_registration_noise(1010.0, band, 50, rng) for _ in range(10_000)])
    assert draws.min() == -10 and draws.max() == 50
    assert all(band.contains(1010.0 + a) for a in np.unique(draws))


# -- updates -----------------------------------------------------------------------------

def test_symmetric_triple_leaves_rating_unchanged():
    h = system()
    a, b, c, d = populate(h, [1300.0, 1200.0, 1300.0, 1400.0])
    for opp, s in ((b, 1.0), (c, 0.5), (d, 0.0)):
        assert h.report(a, opp, s)
    assert h.sp.records[a].announced
    assert abs(h.kc.record[a] - 1300.0) < TOL
    assert abs(h.users[a].rating - 1300.0) < TOL


def test_three_wins_gain_one_and_a_half_k():
    h = system()
    a, b, c, d = populate(h, [1200.0] * 4)
    for opp in (b, c, d):
        assert h.report(a, opp, 1.0)
    assert abs(h.kc.record[a] - 1248.0) < TOL


def test_batched_mode_agrees_with_oracle():
    h = system(mode="batched")
    a, b, c, d = populate(h, [1250.0, 1100.0, 1350.0, 1420.0])
    outcomes = [(b, 1.0), (c, 0.0), (d, 0.5)]
    for opp, s in outcomes:
        assert h.report(a, opp, s)
    want = elo.update_rating(1250.0, [1100.0, 1350.0, 1420.0], [1.0, 0.0, 0.5])
    assert abs(h.kc.record[a] - want) < TOL


def test_both_players_are_updated():
    h = system()
    a, b, c, d = populate(h, [1250.0, 1100.0, 1350.0, 1420.0])
    for _ in range(3):
        assert h.report(a, b, 1.0)
    want_a = elo.update_rating(1250.0, [1100.0] * 3, [1.0] * 3)
    want_b = elo.update_rating(1100.0, [1250.0] * 3, [0.0] * 3)
    assert abs(h.kc.record[a] - want_a) < TOL
    assert abs(h.kc.record[b] - want_b) < TOL


def test_bad_match_reports_are_refused():
    h = system()
    a, b, c = populate(h, [1200.0, 1210.0, 1700.0])
    assert not h.report(a, a, 1.0)
    assert not h.report(a, b, 0.7)
    assert not h.report(a, c, 1.0)
    assert not h.report(a, "nobody", 1.0)
    assert h.sp.records[a].played == 0


def test_announced_users_leave_the_pool():
    h = system()
    ids = populate(h, [1200.0, 1210.0, 1220.0, 1230.0])
    for opp in ids[1:]:
        h.report(ids[0], opp, 0.5)
    rng = np.random.default_rng(0)
    assert h.matchmake(ids[0], rng) is None
    assert not h.report(ids[0], ids[1], 1.0)
    for _ in range(20):
        assert h.matchmake(ids[1], rng) in {ids[2], ids[3]}


def test_counter_discipline():
    h = system()
    ids = populate(h, [1200.0, 1210.0, 1220.0, 1230.0])
    rec = h.sp.records[ids[0]]
    seen = [rec.cnt]
    for opp in ids[1:]:
        h.report(ids[0], opp, 1.0)
        seen.append(rec.cnt)
    assert seen == [1, 2, 3, 3]
    assert rec.announced


# -- attest and verify -------------------------------------------------------------------

def test_full_cycle_moves_to_the_new_rank():
    h = system()
    a, b, c, d = populate(h, [1490.0, 1490.0, 1490.0, 1490.0])
    for opp in (b, c, d):
        h.report(a, opp, 1.0)
    assert h.complete_cycle(a)
    assert h.sp.records[a].rank == LADDER.rank(h.kc.record[a]) == LADDER.rank(1538.0)
    assert h.sp.records[a].cnt == 1 and not h.sp.records[a].announced
    assert abs(h.decrypt_for_test(a) - 1538.0) < TOL


def test_verify_before_the_cycle_ends_is_refused():
    h = system()
    a, b, c, d = populate(h, [1200.0] * 4)
    for opp in (b, c, d):
        h.report(a, opp, 1.0)
    assert h.complete_cycle(a)
    assert h.report(a, b, 0.5)
    assert h.sp.records[a].cnt == 2
    before = h.sp.snapshot()
    user = h.users[a]
    user.verify_new()  # still holds last cycle's attestation
    h.sp.handle()
    user.handle()
    assert user.last_refusal == "update cycle not complete"
    assert h.sp.snapshot() == before


def test_kc_refuses_to_attest_a_different_value():
    h = system()
    a, b, c, d = populate(h, [1200.0] * 4)
    for opp in (b, c, d):
        h.report(a, opp, 1.0)
    assert not h.attest(a, math.floor(h.kc.record[a]) + 1)
    assert h.users[a].last_refusal
    assert h.attest(a)


def test_cross_user_signature_is_refused():
    h = system()
    ids = populate(h, [1200.0] * 4)
    for i in range(3):
        h.report(ids[0], ids[1], 1.0)
    ua, ub = h.users[ids[0]], h.users[ids[1]]
    assert h.attest(ids[0]) and h.attest(ids[1])
    mine = ua.build_verify()
    theirs = ub.build_verify()
    before = h.sp.snapshot()
    ua.send_verify(**{**mine, "sig": theirs["sig"]})
    h.sp.handle()
    ua.handle()
    assert ua.last_refusal == "attestation rejected"
    assert h.sp.snapshot() == before


def test_sp_never_sees_plaintext_types():
    h = system()
    ids = populate(h, [1200.0] * 4)
    for opp in ids[1:]:
        h.report(ids[0], opp, 1.0)
    h.complete_cycle(ids[0])
    assert not any(e["to"] == SP and e["type"] in ("announcement", "attest_request") for e in h.net.trace)


def test_same_seed_same_trace_and_different_seeds_share_no_keys():
    def run(seed):
        h = system(seed)
        ids = populate(h, [1200.0] * 4)
        for opp in ids[1:]:
            h.report(ids[0], opp, 1.0)
        h.complete_cycle(ids[0])
        return h

    a, b, c = run(1), run(1), run(2)
    assert a.net.trace_json() == b.net.trace_json()
    assert a.kc.record == b.kc.record
    pa, pb, pc = (h.kc.keys["u0000"].pk for h in (a, b, c))
    assert S.serialize_public_key(pa) == S.serialize_public_key(pb)
    wa = set(pa.b.coeffs.ravel().tolist()) | set(pa.a.coeffs.ravel().tolist())
    wc = set(pc.b.coeffs.ravel().tolist()) | set(pc.a.coeffs.ravel().tolist())
    assert len(wa & wc) < 4
    assert a.kc.verify_key != c.kc.verify_key


def test_rating_cap_stays_verifiable():
    h = system(k_factor=400.0)
    a, b, c, d = populate(h, [3990.0] * 4)
    for opp in (b, c, d):
        assert h.report(a, opp, 1.0)
    assert h.kc.record[a] == 4000.0
    assert h.complete_cycle(a)
    assert h.sp.records[a].rank == LADDER.rank(4000.0)
