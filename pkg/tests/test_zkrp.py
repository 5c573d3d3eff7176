import math

import numpy as np
import pytest

from helo import primitives as P
from helo import zkrp
from helo.ckks import scheme as S
from helo.ckks.params import params_for
from helo.harness.soundness import RangeBattery, SoundnessConfig

PP = P.CommitParams.setup()
KEY, _ = zkrp.setup("rccc")
RANGE_KEY, _ = zkrp.setup("range")


def statement(v, low=1000, high=1500, blind=12345, **kw):
    return zkrp.RangeStatement(PP, P.commit(PP, v, blind), low, high, **kw)


def prove(v, low=1000, high=1500, blind=12345, key=RANGE_KEY, check=True):
    stmt = statement(v, low, high, blind)
    return stmt, zkrp.prove(key, stmt, zkrp.Witness(v, blind), rng=np.random.default_rng(v), check=check)


def test_completeness_inside_and_at_edges():
    for v in (1000, 1250, 1499):
        stmt, proof = prove(v)
        assert zkrp.verify(RANGE_KEY, stmt, proof)


def test_upper_bound_is_exclusive():
    with pytest.raises(zkrp.ProofError):
        prove(1500)
    stmt, forced = prove(1500, check=False)
    assert not zkrp.verify(RANGE_KEY, stmt, forced)


def test_bypassed_prover_never_convinces_below_the_band():
    rng = np.random.default_rng(0)
    for _ in range(25):
        blind = P.random_scalar(rng)
        stmt, forced = prove(999, blind=blind, check=False)
        assert not zkrp.verify(RANGE_KEY, stmt, forced)


def test_shifted_bounds_reject():
    stmt, proof = prove(1250)
    moved = zkrp.RangeStatement(PP, stmt.commitment, 1001, 1501)
    assert not zkrp.verify(RANGE_KEY, moved, proof)


def test_other_key_or_relation_rejects():
    stmt, proof = prove(1250)
    assert not zkrp.verify(zkrp.setup("range", b"another setup")[0], stmt, proof)
    assert not zkrp.verify(KEY, stmt, proof)


def test_single_bit_mutations_reject():
    stmt, proof = prove(1250)
    blob = zkrp.serialize_proof(proof)
    rng = np.random.default_rng(1)
    for _ in range(200):
        bad = bytearray(blob)
        bad[int(rng.integers(len(bad)))] ^= 1 << int(rng.integers(8))
        assert not zkrp.verify(RANGE_KEY, stmt, bytes(bad))


def test_serialization_round_trip_and_size():
    stmt, proof = prove(1250)
    blob = zkrp.serialize_proof(proof)
    assert zkrp.deserialize_proof(blob) == proof
    assert stmt.bits == 9
    assert proof.element_count == zkrp.predicted_elements(1000, 1500) == 12 * 9 + 5
    assert zkrp.verify(RANGE_KEY, stmt, blob)
    assert zkrp.deserialize_statement(zkrp.serialize_statement(stmt)) == stmt


@pytest.mark.parametrize("low,high", [(0, 2), (0, 500), (3500, 4000), (0, 4000), (7, 1030)])
def test_size_grows_with_log_of_width(low, high):
    v = (low + high) // 2
    stmt, proof = prove(v, low, high)
    assert zkrp.verify(RANGE_KEY, stmt, proof)
    assert proof.element_count == 12 * max(1, math.ceil(math.log2(high - low))) + 5


def test_statement_validation():
    with pytest.raises(ValueError):
        statement(5, 10, 10)
    with pytest.raises(ValueError):
        zkrp.setup("nonsense")


def test_garbage_proof_is_a_rejection_not_a_crash():
    stmt, _ = prove(1250)
    for junk in (b"", b"HRPF", b"\x00" * 4000):
        assert not zkrp.verify(RANGE_KEY, stmt, junk)


# -- ciphertext binding with real CKKS ---------------------------------------------------

@pytest.fixture(scope="module")
def ckks():
    params = params_for("toy")
    keys = S.keygen(params, 31)

    def encryptor(value, seed):
        return S.serialize_ciphertext(S.encrypt(keys.pk, [value], np.random.default_rng(seed)))

    return keys, encryptor


def bound_pair(ckks, rating, blind=777, seed=4242, low=1000, high=1500):
    keys, encryptor = ckks
    v = math.floor(rating)
    stmt = zkrp.RangeStatement(PP, P.commit(PP, v, blind), low, high, S.serialize_public_key(keys.pk),
                               encryptor(rating, seed))
    return stmt, zkrp.Witness(v, blind, seed, rating)


def test_consistent_pair_verifies(ckks):
    stmt, w = bound_pair(ckks, 1234.56)
    proof = zkrp.prove(KEY, stmt, w, ckks[1], np.random.default_rng(0))
    assert zkrp.verify(KEY, stmt, proof)
    assert zkrp.verify_binding(KEY, stmt, proof, w, ckks[1])


def test_reencrypting_a_different_value_fails(ckks):
    stmt, w = bound_pair(ckks, 1234.56)
    proof = zkrp.prove(KEY, stmt, w, ckks[1], np.random.default_rng(0))
    swapped = zkrp.RangeStatement(**{**stmt.__dict__, "ciphertext": ckks[1](1244.56, 99)})
    assert not zkrp.verify(KEY, swapped, proof)
    lie = zkrp.Witness(w.value, w.blind, 99, 1244.56)
    assert not zkrp.verify_binding(KEY, swapped, proof, lie, ckks[1])
    with pytest.raises(zkrp.ProofError):
        zkrp.prove(KEY, swapped, w, ckks[1])


def test_recommitting_a_different_value_fails(ckks):
    stmt, w = bound_pair(ckks, 1234.56)
    proof = zkrp.prove(KEY, stmt, w, ckks[1], np.random.default_rng(0))
    other = P.commit(PP, w.value + 10, w.blind)
    moved = zkrp.RangeStatement(**{**stmt.__dict__, "commitment": other})
    assert not zkrp.verify(KEY, moved, proof)
    with pytest.raises(zkrp.ProofError):
        zkrp.prove(KEY, moved, zkrp.Witness(w.value + 10, w.blind, w.enc_seed, w.plaintext), ckks[1])


def test_small_battery():
    report = RangeBattery(SoundnessConfig(honest=30, adversarial=60, seed=3)).run()
    assert report.passed, report.to_dict()
