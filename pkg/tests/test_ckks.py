import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helo import elo
from helo.ckks import noise as N
from helo.ckks import scheme as S
from helo.ckks.encoding import decode, encode
from helo.ckks.params import ParamsError, params_for
from helo.ckks.poly import eval_poly, poly_depth


@pytest.fixture(scope="module")
def params():
    return params_for("toy")


@pytest.fixture(scope="module")
def keys(params):
    return S.keygen(params, 2024)


def enc(keys, values, seed=None, **kw):
    return S.encrypt(keys.pk, values, np.random.default_rng(seed), **kw)


def dec(keys, ct, n=1):
    return S.decrypt(keys.sk, ct)[:n]


def within_bound(keys, ct, expected):
    expected = np.atleast_1d(np.asarray(expected, dtype=float))
    err = np.max(np.abs(dec(keys, ct, expected.size) - expected))
    assert err <= ct.noise, f"error {err:.3g} exceeds tracked bound {ct.noise:.3g}"
    return err


# -- parameters and encoding -------------------------------------------------------------

def test_toy_parameter_shape(params):
    assert params.degree == 2048 and params.scale_bits == 40
    assert params.max_level == 8
    assert all(q % 4096 == 1 for q in params.ring.moduli)
    assert all(q > 2 ** 40 for q in params.ring.moduli[1:])


def test_unknown_label_and_corrupt_file(tmp_path):
    with pytest.raises(ParamsError):
        params_for("huge")
    bad = tmp_path / "p.json"
    bad.write_text('{"toy": {"degree": 3000}}')
    with pytest.raises(ParamsError):
        params_for("toy", bad)


def test_encoding_round_trip():
    rng = np.random.default_rng(0)
    v = rng.uniform(-1000, 1000, 64)
    got = decode(encode(v, 2.0 ** 40, 256), 2.0 ** 40, 256)[:64]
    assert np.max(np.abs(got - v)) < 1e-8


# -- keys and encryption -----------------------------------------------------------------

def test_keygen_is_deterministic(params):
    a, b = S.keygen(params, 5), S.keygen(params, 5)
    assert S.serialize_public_key(a.pk) == S.serialize_public_key(b.pk)
    assert S.serialize_secret_key(a.sk) == S.serialize_secret_key(b.sk)
    assert S.serialize_switch_key(params, a.rlk) == S.serialize_switch_key(params, b.rlk)
    assert S.serialize_public_key(S.keygen(params, 6).pk) != S.serialize_public_key(a.pk)


def test_zero_and_half(keys):
    z = enc(keys, [0.0], 1)
    assert abs(dec(keys, z)[0]) <= z.noise
    h = enc(keys, [0.5], 2)
    assert abs(dec(keys, h)[0] - 0.5) <= h.noise


def test_fresh_noise_matches_calculator(keys, params):
    # The calculator's bound holds and is not vacuous: the measured error sits within a few hundred times it.
    worst = 0.0
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.uniform(-100, 100, params.slot_count)
        ct = enc(keys, v, rng)
        worst = max(worst, float(np.max(np.abs(S.decrypt(keys.sk, ct) - v))))
    assert worst <= N.fresh(params)
    assert worst >= N.fresh(params) / 500


def test_probabilistic_encryption(keys):
    assert enc(keys, [3.0], 1).to_bytes() != enc(keys, [3.0], 2).to_bytes()


def test_rating_round_trip_precision(keys):
    ct = enc(keys, [1500.0], 4)
    assert abs(dec(keys, ct)[0] - 1500.0) <= 2 ** -20 * 1500


def test_message_bound_enforced(keys):
    with pytest.raises(S.CkksError):
        enc(keys, [1e6])
    with pytest.raises(S.CkksError):
        enc(keys, [50.0], bound=10.0)


def test_wrong_key_refused(keys, params):
    other = S.keygen(params, 77)
    with pytest.raises(S.KeyMismatchError):
        S.decrypt(other.sk, enc(keys, [1.0]))
    with pytest.raises(S.KeyMismatchError):
        S.eval_add(enc(keys, [1.0]), S.encrypt(other.pk, [1.0]))


# -- arithmetic --------------------------------------------------------------------------

def test_add_zero_and_self_subtraction(keys):
    a = enc(keys, [12.5, -3.0], 5)
    within_bound(keys, S.eval_add(a, 0.0), [12.5, -3.0])
    within_bound(keys, S.eval_sub(a, a), [0.0, 0.0])


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-1000, 1000), min_size=1, max_size=16), st.integers(0, 2 ** 32))
def test_add_sub_within_bound(keys, values, seed):
    rng = np.random.default_rng(seed)
    a = np.array(values)
    b = rng.uniform(-1000, 1000, a.size)
    ca, cb = enc(keys, a, rng), enc(keys, b, rng)
    within_bound(keys, S.eval_add(ca, cb), a + b)
    within_bound(keys, S.eval_sub(ca, cb), a - b)
    within_bound(keys, S.plain_sub(2.0, ca), 2.0 - a)


def test_mul_const_examples(keys):
    x = enc(keys, [1600.0], 6)
    one = S.eval_mul_const(x, 1.0)
    assert one.level == x.level - 1
    within_bound(keys, one, [1600.0])
    quarter = S.eval_mul_const(x, 0.0025)
    within_bound(keys, quarter, [4.0])
    assert quarter.scale == x.params.scale


@settings(max_examples=15, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(0, 2 ** 32))
def test_mul_const_within_bound(keys, k, x, seed):
    within_bound(keys, S.eval_mul_const(enc(keys, [x], seed, bound=100.0), k), [k * x])


def test_mul_examples(keys):
    two, three = enc(keys, [2.0], 7, bound=4.0), enc(keys, [3.0], 8, bound=4.0)
    within_bound(keys, S.eval_mul(two, three, keys.rlk), [6.0])
    a = enc(keys, [7.25, -1.5], 9, bound=8.0)
    one = enc(keys, [1.0, 1.0], 10, bound=1.0)
    within_bound(keys, S.eval_mul(a, one, keys.rlk), [7.25, -1.5])


def test_depth_seven_chain_keeps_precision(keys, params):
    x = enc(keys, [1.05], 11, bound=2.0)
    acc, want = x, 1.05
    for _ in range(7):
        acc = S.eval_mul(acc, x, keys.rlk)
        want *= 1.05
    assert acc.level == params.max_level - 7
    assert S.estimate_precision(dec(keys, acc), [want]) >= 20
    within_bound(keys, acc, [want])


def test_rescale_metadata_and_drift(keys, params):
    a, b = enc(keys, [3.0], 12, bound=4.0), enc(keys, [-2.0], 13, bound=4.0)
    raw = S.eval_mul(a, b, keys.rlk, rescale_result=False)
    q_top = params.ring.moduli[raw.level]
    res = S.rescale(raw)
    assert res.scale == raw.scale / q_top
    assert abs(res.scale / params.scale - 1) < 2 ** -10
    drift = abs(dec(keys, res)[0] - dec(keys, raw)[0])
    assert drift <= N.rounding_poly(params) / res.scale
    within_bound(keys, res, [-6.0])


def test_level_errors(keys):
    bottom = S.mod_drop(enc(keys, [1.0]), 0)
    with pytest.raises(S.LevelError):
        S.rescale(bottom)
    with pytest.raises(S.LevelError):
        S.eval_mul(bottom, bottom, keys.rlk)
    with pytest.raises(S.LevelError):
        S.eval_mul_const(bottom, 2.0)


def test_adding_across_levels_aligns(keys):
    a = enc(keys, [10.0], 14)
    b = S.eval_mul_const(enc(keys, [3.0], 15), 2.0)
    out = S.eval_add(a, b)
    assert out.level == b.level
    within_bound(keys, out, [16.0])


# -- polynomial evaluation and refresh ---------------------------------------------------

@pytest.fixture(scope="module")
def kernel():
    return elo.chebyshev_coeffs(50)


def test_kernel_depth_fits_budget(kernel, params):
    assert poly_depth(kernel) <= 7
    # One level for the division by 400, then the kernel; refresh happens at level 0.
    assert poly_depth(kernel) + 1 <= params.max_level


@pytest.mark.parametrize("x", [0.0, -0.5, 2.0, -4.9])
def test_encrypted_kernel(keys, kernel, x):
    ct = enc(keys, [x], 16, bound=5.0)
    out = eval_poly(ct, kernel, elo.KERNEL_INTERVAL, keys.rlk)
    want = float(elo.logistic_kernel(x))
    # Series error plus the tracked homomorphic error.
    assert abs(dec(keys, out)[0] - want) <= out.noise + 5e-6


def test_poly_refuses_shallow_input(keys, kernel):
    with pytest.raises(S.LevelError):
        eval_poly(S.mod_drop(enc(keys, [0.1]), 3), kernel, elo.KERNEL_INTERVAL, keys.rlk)


def test_refresh_restores_top_level(keys, params):
    low = S.mod_drop(enc(keys, [321.5], 17), 1)
    fresh = S.refresh(low, keys, np.random.default_rng(18))
    assert fresh.level == params.max_level
    within_bound(keys, fresh, [321.5])


def test_precision_estimate_definition():
    assert S.estimate_precision([1.0], [1.0]) == 60.0
    assert S.estimate_precision([1.0 + 2 ** -20], [1.0]) == pytest.approx(20.0)
    assert S.estimate_precision([2 ** -20], [0.0]) == pytest.approx(20.0)
    assert N.precision_bits(0.0) == 60.0


# -- key switching and serialization -----------------------------------------------------

def test_key_switch_to_another_user(keys, params):
    other = S.keygen(params, 99)
    swk = S.make_switch_key(params, keys.sk.ext, other.sk, 100)
    swk = S.SwitchKey(swk.b, swk.a, other.key_id)
    ct = S.key_switch(enc(keys, [1234.5], 19), swk)
    assert ct.key_id == other.key_id
    assert abs(S.decrypt(other.sk, ct)[0] - 1234.5) <= ct.noise


def test_serialization_round_trips(keys, params):
    ct = S.eval_mul_const(enc(keys, [42.0, -7.0], 20), 0.5)
    back = S.deserialize_ciphertext(params, S.serialize_ciphertext(ct))
    assert back == ct and back.scale == ct.scale and back.noise == ct.noise
    pk = S.deserialize_public_key(params, S.serialize_public_key(keys.pk))
    assert pk.key_id == keys.pk.key_id
    sk = S.deserialize_secret_key(params, S.serialize_secret_key(keys.sk))
    assert np.allclose(S.decrypt(sk, ct)[:2], [21.0, -3.5], atol=1e-6)
    rlk = S.deserialize_switch_key(params, S.serialize_switch_key(params, keys.rlk))
    assert np.array_equal(rlk.b, keys.rlk.b)


def test_corrupt_ciphertext_bytes_rejected(keys, params):
    blob = S.serialize_ciphertext(enc(keys, [1.0]))
    with pytest.raises(Exception):
        S.deserialize_ciphertext(params, blob[:-9])
    with pytest.raises(Exception):
        S.deserialize_ciphertext(params, b"JUNK" + blob[4:])


def test_serialized_sizes_match_prediction(keys, params):
    sizes = S.key_sizes(params)
    assert len(S.serialize_public_key(keys.pk)) == pytest.approx(sizes["public_key"], rel=0.05)
    assert len(S.serialize_ciphertext(enc(keys, [1.0]))) == pytest.approx(sizes["ciphertext"], rel=0.05)
    assert math.isfinite(params.modulus_bits())
