"""Leveled RNS-CKKS: keys, encryption and the homomorphic operation set.

Ciphertexts are kept in the NTT domain.  Scales are tracked exactly as
metadata; constant multiplications encode their constant at whatever scale
lands the result on exactly the nominal scale 2**scale_bits, so every
ciphertext produced by the rating circuit carries the same scale and adds
without correction.
"""
from __future__ import annotations

import hashlib
import logging
import math
import secrets
import struct
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from helo import _kernels as K
from helo import ring as R
from helo.ckks import noise as N
from helo.ckks.encoding import decode, encode
from helo.ckks.params import CkksParams

log = logging.getLogger(__name__)

CT_MAGIC = b"HECT"
KEY_MAGIC = b"HEKY"
FORMAT_VERSION = 1


class CkksError(ValueError):
    pass


class LevelError(CkksError):
    """Not enough modulus levels left for the requested operation."""


class DecryptionError(CkksError):
    pass


class KeyMismatchError(CkksError):
    pass


@dataclass(frozen=True)
class PlaintextVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise CkksError("plaintext values must be finite")

    @classmethod
    def of(cls, values) -> "PlaintextVector":
        if isinstance(values, PlaintextVector):
            return values
        if np.isscalar(values):
            values = [values]
        return cls(tuple(float(v) for v in values))


# ---------------------------------------------------------------------------
# keys
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SwitchKey:
    """Key-switching material from a source secret to a target secret.

    One (b_j, a_j) pair per ciphertext prime, each over q_0..q_L plus the
    special prime, NTT domain.
    """

    b: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    target_id: bytes = b""


@dataclass(frozen=True, eq=False)
class SecretKey:
    params: CkksParams
    small: np.ndarray = field(repr=False)
    ext: np.ndarray = field(repr=False)
    key_id: bytes = b""

    def poly(self, level: int) -> R.RnsPolynomial:
        return R.RnsPolynomial(self.params.ring, np.ascontiguousarray(self.ext[: level + 1]), True)


@dataclass(frozen=True, eq=False)
class PublicKey:
    params: CkksParams
    b: R.RnsPolynomial
    a: R.RnsPolynomial

    @cached_property
    def key_id(self) -> bytes:
        return _key_id(self.b, self.a)


@dataclass(frozen=True, eq=False)
class KeyBundle:
    params: CkksParams
    pk: PublicKey
    sk: SecretKey
    rlk: SwitchKey

    @property
    def key_id(self) -> bytes:
        return self.pk.key_id

    def public_bytes(self) -> bytes:
        return serialize_public_key(self.pk)


def _key_id(b: R.RnsPolynomial, a: R.RnsPolynomial) -> bytes:
    h = hashlib.sha256()
    h.update(b.coeffs.tobytes())
    h.update(a.coeffs.tobytes())
    return h.digest()[:8]


def _rng(randomness) -> np.random.Generator:
    if isinstance(randomness, np.random.Generator):
        return randomness
    if randomness is None:
        return np.random.default_rng(secrets.randbits(128))
    if isinstance(randomness, (bytes, bytearray)):
        return np.random.default_rng(int.from_bytes(hashlib.sha256(randomness).digest(), "little"))
    return np.random.default_rng(randomness)


def _ext_moduli(p: CkksParams) -> tuple[int, ...]:
    return p.ring.moduli + p.ring.special_moduli


def make_switch_key(params: CkksParams, source_ext: np.ndarray, target: SecretKey, seed) -> SwitchKey:
    """Switching key taking ciphertexts under `source_ext` (an NTT-domain secret) to `target`."""
    rng = _rng(seed)
    ring = params.ring
    moduli = _ext_moduli(params)
    bx = R.get_basis(moduli, ring.degree)
    special = ring.special_moduli[0]
    digits = ring.level_count
    bs = np.empty((digits, len(moduli), ring.degree), dtype=np.int64)
    as_ = np.empty_like(bs)
    for j in range(digits):
        a = np.stack([rng.integers(0, q, size=ring.degree, dtype=np.int64) for q in moduli])
        e = bx.ntt(R.from_small(ring, R.small_gaussian(ring.degree, params.sigma, rng), moduli=moduli))
        b = K.sub(e, K.mul(a, target.ext, bx.qs, bx.qinv), bx.qs)
        qj = ring.moduli[j]
        gadget = np.zeros(len(moduli), dtype=np.int64)
        gadget[j] = special % qj
        b = K.add(b, K.mul_scalar(source_ext, gadget, bx.qs, bx.qinv), bx.qs)
        bs[j] = b
        as_[j] = a
    return SwitchKey(bs, as_, target.key_id)


def keygen(params: CkksParams, seed=None) -> KeyBundle:
    """Secret, public and relinearization keys; deterministic under `seed`."""
    rng = _rng(seed)
    ring = params.ring
    moduli = _ext_moduli(params)
    bx = R.get_basis(moduli, ring.degree)
    small = R.small_ternary(ring.degree, rng)
    s_ext = bx.ntt(R.from_small(ring, small, moduli=moduli))
    top = ring.max_level
    bq = ring.basis(top)
    a = R.sample_uniform(ring, rng, top, is_ntt=True)
    e = bq.ntt(R.from_small(ring, R.small_gaussian(ring.degree, params.sigma, rng), top))
    s_top = s_ext[: top + 1]
    b = R.RnsPolynomial(ring, K.sub(e, K.mul(a.coeffs, s_top, bq.qs, bq.qinv), bq.qs), True)
    pk = PublicKey(params, b, a)
    sk = SecretKey(params, small, s_ext, pk.key_id)
    s2 = K.mul(s_ext, s_ext, bx.qs, bx.qinv)
    rlk = make_switch_key(params, s2, sk, rng)
    return KeyBundle(params, pk, sk, rlk)


# ---------------------------------------------------------------------------
# ciphertexts
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ciphertext:
    params: CkksParams
    parts: tuple[R.RnsPolynomial, ...]
    scale: float
    key_id: bytes
    noise: float = 0.0
    bound: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise CkksError("scale must be positive")
        levels = {p.level for p in self.parts}
        if len(levels) != 1:
            raise CkksError("ciphertext parts at different levels")

    @property
    def level(self) -> int:
        return self.parts[0].level

    @property
    def precision_estimate(self) -> float:
        return N.precision_bits(self.noise)

    def to_bytes(self) -> bytes:
        return serialize_ciphertext(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ciphertext):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    __hash__ = None  # type: ignore[assignment]


def _ct(params, parts, scale, key_id, noise, bound) -> Ciphertext:
    return Ciphertext(params, tuple(parts), float(scale), key_id, float(noise), float(bound))


def encrypt(pk: PublicKey, values, randomness=None, level: int | None = None,
            bound: float | None = None) -> Ciphertext:
    """Public-key encryption of real slot values at scale Delta.

    `bound` is the public magnitude bound carried for noise tracking; it
    defaults to the parameter set's message bound so it leaks nothing.
    """
    params = pk.params
    ring = params.ring
    m = PlaintextVector.of(values)
    if len(m.values) > params.slot_count:
        raise CkksError(f"{len(m.values)} values exceed {params.slot_count} slots")
    if any(abs(v) > params.message_bound for v in m.values):
        raise CkksError(f"message exceeds bound {params.message_bound}")
    level = ring.max_level if level is None else level
    rng = _rng(randomness)
    bq = ring.basis(level)
    mpoly = bq.ntt(R.from_integers(ring, encode(m.values, params.scale, ring.degree), level).coeffs)
    v = bq.ntt(R.from_small(ring, R.small_ternary(ring.degree, rng), level))
    e0 = bq.ntt(R.from_small(ring, R.small_gaussian(ring.degree, params.sigma, rng), level))
    e1 = bq.ntt(R.from_small(ring, R.small_gaussian(ring.degree, params.sigma, rng), level))
    b = pk.b.coeffs[: level + 1]
    a = pk.a.coeffs[: level + 1]
    c0 = K.add(K.add(K.mul(b, v, bq.qs, bq.qinv), e0, bq.qs), mpoly, bq.qs)
    c1 = K.add(K.mul(a, v, bq.qs, bq.qinv), e1, bq.qs)
    parts = (R.RnsPolynomial(ring, c0, True), R.RnsPolynomial(ring, c1, True))
    if bound is None:
        bound = params.message_bound
    elif any(abs(v) > bound for v in m.values):
        raise CkksError(f"message exceeds stated bound {bound}")
    return _ct(params, parts, params.scale, pk.key_id, N.fresh(params), float(bound))


def decrypt_raw(sk: SecretKey, ct: Ciphertext) -> list[int]:
    """Centred integer coefficients of c0 + c1*s."""
    if len(ct.parts) != 2:
        raise DecryptionError(f"cannot decrypt a {len(ct.parts)}-part ciphertext; relinearize first")
    if ct.params != sk.params:
        raise KeyMismatchError("parameter mismatch")
    if ct.key_id != sk.key_id:
        raise KeyMismatchError("ciphertext is not under this secret key")
    low = _decrypt_level(ct)
    if low < ct.level:
        vals = _phase(sk, mod_drop(ct, low))
        if max(abs(v) for v in vals) < ct.params.ring.modulus(low) // 4:
            return vals
    vals = _phase(sk, ct)
    Q = ct.params.ring.modulus(ct.level)
    if max(abs(v) for v in vals) >= Q // 4:
        raise DecryptionError("value wrapped the remaining modulus (level exhausted below decodable floor)")
    return vals


def _phase(sk: SecretKey, ct: Ciphertext) -> list[int]:
    c0, c1 = ct.parts
    return R.crt_reconstruct(R.ring_add(c0, R.ring_mul(c1, sk.poly(ct.level))))


def _decrypt_level(ct: Ciphertext) -> int:
    """Lowest level whose modulus comfortably holds the public bound; CRT there is much cheaper."""
    need = 64.0 * (max(ct.bound, 1.0) * ct.scale * ct.params.degree)
    q = 1.0
    for lvl, m in enumerate(ct.params.ring.moduli[: ct.level + 1]):
        q *= m
        if q > need:
            return lvl
    return ct.level


def decrypt(sk: SecretKey, ct: Ciphertext) -> np.ndarray:
    vals = decrypt_raw(sk, ct)
    return decode(vals, ct.scale, ct.params.degree)


# ---------------------------------------------------------------------------
# level and scale plumbing
# ---------------------------------------------------------------------------

def _scales_equal(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=2.0 ** -40)


def _compat(a: Ciphertext, b: Ciphertext) -> None:
    if a.params != b.params:
        raise CkksError("parameter mismatch")
    if a.key_id != b.key_id:
        raise KeyMismatchError("operands are encrypted under different keys")


def mod_drop(ct: Ciphertext, level: int) -> Ciphertext:
    """Discard limbs down to `level`; value and scale unchanged."""
    if level == ct.level:
        return ct
    return replace(ct, parts=tuple(R.mod_drop(p, level) for p in ct.parts))


def mul_int(ct: Ciphertext, k: int) -> Ciphertext:
    """k * ct for an integer k; no level is consumed and the scale is unchanged."""
    parts = tuple(R.ring_mul_scalar(p, k) for p in ct.parts)
    return replace(ct, parts=parts, noise=ct.noise * abs(k), bound=ct.bound * abs(k))


def rescale(ct: Ciphertext) -> Ciphertext:
    """Divide by the top prime: level - 1, scale / q_top."""
    if ct.level < 1:
        raise LevelError("cannot rescale at level 0")
    q = ct.params.ring.moduli[ct.level]
    new_scale = ct.scale / q
    parts = tuple(R.drop_limb(p) for p in ct.parts)
    return replace(ct, parts=parts, scale=new_scale, noise=N.rescale(ct.params, ct.noise, new_scale))


def _scaled_const(ct: Ciphertext, k: float, target_scale: float) -> Ciphertext:
    """k*ct one level down with scale exactly `target_scale`."""
    if ct.level < 1:
        raise LevelError("constant multiplication needs a level")
    q = ct.params.ring.moduli[ct.level]
    enc_scale = target_scale * q / ct.scale
    kint = int(round(k * enc_scale))
    parts = tuple(R.drop_limb(R.ring_mul_scalar(p, kint)) for p in ct.parts)
    nz = N.mul_const(ct.params, ct.noise, k, ct.bound, target_scale, enc_scale)
    return replace(ct, parts=parts, scale=float(target_scale), noise=nz, bound=abs(k) * ct.bound)


def retarget(ct: Ciphertext, level: int, scale: float) -> Ciphertext:
    """Bring ct to exactly (level, scale): one rescale by an integer-encoded 1, then drop limbs."""
    if ct.level == level and _scales_equal(ct.scale, scale):
        return replace(ct, scale=float(scale))
    if ct.level < level + 1:
        raise LevelError(f"cannot retarget from level {ct.level} to {level} with a scale change")
    return _scaled_const(mod_drop(ct, level + 1), 1.0, scale)


def align(a: Ciphertext, b: Ciphertext) -> tuple[Ciphertext, Ciphertext]:
    """Match level and scale of two ciphertexts before addition."""
    _compat(a, b)
    if a.level == b.level:
        if _scales_equal(a.scale, b.scale):
            return a, replace(b, scale=a.scale)
        if a.level == 0:
            if math.isclose(a.scale, b.scale, rel_tol=2.0 ** -10):
                return a, replace(b, scale=a.scale)
            raise LevelError("scale mismatch at level 0")
        if a.scale > b.scale:
            b = mod_drop(b, b.level - 1)
            return retarget(a, b.level, b.scale), b
        a = mod_drop(a, a.level - 1)
        return a, retarget(b, a.level, a.scale)
    hi, lo = (a, b) if a.level > b.level else (b, a)
    if _scales_equal(hi.scale, lo.scale):
        hi = replace(mod_drop(hi, lo.level), scale=lo.scale)
    else:
        hi = retarget(hi, lo.level, lo.scale)
    return (hi, lo) if a.level > b.level else (lo, hi)


# ---------------------------------------------------------------------------
# homomorphic operations
# ---------------------------------------------------------------------------

Operand = Union[Ciphertext, PlaintextVector, float, int, Sequence[float]]


def _plain_poly(ct: Ciphertext, values) -> R.RnsPolynomial:
    ring = ct.params.ring
    if np.isscalar(values):
        k = int(round(float(values) * ct.scale))
        coeffs = np.stack([np.full(ring.degree, k % q, dtype=np.int64) for q in ring.moduli[: ct.level + 1]])
        return R.RnsPolynomial(ring, coeffs, True)
    m = PlaintextVector.of(values)
    ints = encode(m.values, ct.scale, ring.degree)
    return R.ntt_forward(R.from_integers(ring, ints, ct.level))


def _plain_add(ct: Ciphertext, values, sign: int) -> Ciphertext:
    pt = _plain_poly(ct, values)
    c0 = R.ring_add(ct.parts[0], pt) if sign > 0 else R.ring_sub(ct.parts[0], pt)
    mag = abs(float(values)) if np.isscalar(values) else max((abs(v) for v in PlaintextVector.of(values).values), default=0.0)
    enc_err = 0.5 / ct.scale if np.isscalar(values) else N.encoding_poly(ct.params) / ct.scale
    return replace(ct, parts=(c0,) + ct.parts[1:], noise=ct.noise + enc_err, bound=ct.bound + mag)


def eval_add(a: Ciphertext, b: Operand) -> Ciphertext:
    if not isinstance(b, Ciphertext):
        return _plain_add(a, b, +1)
    a, b = align(a, b)
    parts = tuple(R.ring_add(x, y) for x, y in zip(a.parts, b.parts))
    return replace(a, parts=parts, noise=N.add(a.noise, b.noise), bound=a.bound + b.bound)


def eval_sub(a: Ciphertext, b: Operand) -> Ciphertext:
    if not isinstance(b, Ciphertext):
        return _plain_add(a, b, -1)
    a, b = align(a, b)
    parts = tuple(R.ring_sub(x, y) for x, y in zip(a.parts, b.parts))
    return replace(a, parts=parts, noise=N.add(a.noise, b.noise), bound=a.bound + b.bound)


def eval_neg(a: Ciphertext) -> Ciphertext:
    return replace(a, parts=tuple(R.ring_neg(p) for p in a.parts))


def plain_sub(values, ct: Ciphertext) -> Ciphertext:
    """values - ct (plaintext on the left, as in S_real - c_exp_sum)."""
    return _plain_add(eval_neg(ct), values, +1)


def eval_mul_const(ct: Ciphertext, k: float) -> Ciphertext:
    """k * ct; consumes one level and lands on the nominal scale."""
    if abs(k) > ct.params.message_bound:
        raise CkksError("constant exceeds message bound")
    return _scaled_const(ct, float(k), ct.params.scale)


def _key_switch_core(params: CkksParams, d_ntt: np.ndarray, key: SwitchKey, level: int) -> tuple[np.ndarray, np.ndarray]:
    ring = params.ring
    top = ring.max_level
    bq = ring.basis(level)
    bx = ring.extended_basis(level)
    rows = list(range(level + 1)) + [top + 1]
    n_rows = level + 2
    dcoef = bq.intt(d_ntt)
    acc0 = np.zeros((n_rows, ring.degree), dtype=np.int64)
    acc1 = np.zeros_like(acc0)
    for j in range(level + 1):
        lifted = K.lift_centered(dcoef[j], np.int64(ring.moduli[j]), bx.qs)
        others = [i for i in range(n_rows) if i != j]
        lifted[others] = bx.sub_basis(others).ntt(lifted[others])
        lifted[j] = d_ntt[j]
        K.mul_acc(acc0, lifted, np.ascontiguousarray(key.b[j][rows]), bx.qs, bx.qinv)
        K.mul_acc(acc1, lifted, np.ascontiguousarray(key.a[j][rows]), bx.qs, bx.qinv)
    u0 = R.divide_round_top(acc0, bx, True)
    u1 = R.divide_round_top(acc1, bx, True)
    return u0, u1


def _tensor(a: Ciphertext, b: Ciphertext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    bq = a.params.ring.basis(a.level)
    a0, a1 = (p.coeffs for p in a.parts)
    b0, b1 = (p.coeffs for p in b.parts)
    d0 = K.mul(a0, b0, bq.qs, bq.qinv)
    d1 = K.mul(a0, b1, bq.qs, bq.qinv)
    K.mul_acc(d1, a1, b0, bq.qs, bq.qinv)
    d2 = K.mul(a1, b1, bq.qs, bq.qinv)
    return d0, d1, d2


def eval_mul(a: Ciphertext, b: Ciphertext, rlk: SwitchKey, rescale_result: bool = True) -> Ciphertext:
    """a * b, relinearized to two parts, then rescaled (unless told otherwise)."""
    _compat(a, b)
    if len(a.parts) != 2 or len(b.parts) != 2:
        raise CkksError("operands must be relinearized")
    lvl = min(a.level, b.level)
    if rescale_result and lvl < 1:
        raise LevelError("multiplication needs a level")
    a, b = mod_drop(a, lvl), mod_drop(b, lvl)
    params = a.params
    bq = params.ring.basis(lvl)
    d0, d1, d2 = _tensor(a, b)
    u0, u1 = _key_switch_core(params, d2, rlk, lvl)
    c0 = K.add(d0, u0, bq.qs)
    c1 = K.add(d1, u1, bq.qs)
    pre_scale = a.scale * b.scale
    ring = params.ring
    out = _ct(params, (R.RnsPolynomial(ring, c0, True), R.RnsPolynomial(ring, c1, True)),
              pre_scale, a.key_id, 0.0, a.bound * b.bound)
    if not rescale_result:
        nz = a.noise * b.bound + b.noise * a.bound + a.noise * b.noise + N.keyswitch_poly(params, lvl) / pre_scale
        return replace(out, noise=nz)
    out = rescale(out)
    nz = N.mul(params, lvl, a.noise, a.bound, b.noise, b.bound, pre_scale, out.scale)
    return replace(out, noise=nz)


def eval_square(a: Ciphertext, rlk: SwitchKey) -> Ciphertext:
    return eval_mul(a, a, rlk)


def key_switch(ct: Ciphertext, key: SwitchKey) -> Ciphertext:
    """Re-key a ciphertext to the switching key's target secret."""
    if len(ct.parts) != 2:
        raise CkksError("key switching expects two parts")
    params = ct.params
    bq = params.ring.basis(ct.level)
    c0, c1 = ct.parts
    u0, u1 = _key_switch_core(params, c1.coeffs, key, ct.level)
    ring = params.ring
    parts = (R.RnsPolynomial(ring, K.add(c0.coeffs, u0, bq.qs), True), R.RnsPolynomial(ring, u1, True))
    nz = ct.noise + N.keyswitch_poly(params, ct.level) / ct.scale
    return replace(ct, parts=parts, key_id=key.target_id, noise=nz)


_refresh_warned = False


def refresh(ct: Ciphertext, keys: KeyBundle, randomness=None) -> Ciphertext:
    """Key-holder refresh standing in for bootstrapping: decrypt, then encrypt at the top level."""
    global _refresh_warned
    level = logging.DEBUG if _refresh_warned else logging.WARNING
    _refresh_warned = True
    log.log(level, "refresh: key holder decrypts and re-encrypts (trust-model substitute for bootstrapping)")
    values = decrypt(keys.sk, ct)
    nonzero = np.flatnonzero(np.abs(values) > 0)
    used = values[: nonzero[-1] + 1] if nonzero.size else values[:1]
    out = encrypt(keys.pk, used, randomness)
    return replace(out, noise=out.noise + ct.noise, bound=ct.bound)


def estimate_precision(values, reference, cap: float = 60.0) -> float:
    """-log2 of the worst relative slot error (absolute error where the reference is zero)."""
    vals = np.atleast_1d(np.asarray(values, dtype=np.float64))
    ref = np.atleast_1d(np.asarray(reference, dtype=np.float64))
    vals = vals[: ref.size]
    err = np.abs(vals - ref)
    denom = np.where(ref == 0, 1.0, np.abs(ref))
    worst = float(np.max(err / denom)) if err.size else 0.0
    if worst == 0:
        return cap
    return min(cap, -math.log2(worst))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_CT_HEAD = struct.Struct("<4sB8sIHBBddd8s")


def _label_bytes(label: str) -> bytes:
    return label.encode("ascii")[:8].ljust(8, b"\0")


def serialize_ciphertext(ct: Ciphertext) -> bytes:
    p = ct.params
    head = _CT_HEAD.pack(CT_MAGIC, FORMAT_VERSION, _label_bytes(p.label), p.degree, ct.level + 1,
                         p.scale_bits, len(ct.parts), ct.scale, ct.noise, ct.bound, ct.key_id)
    return head + b"".join(R.serialize(x) for x in ct.parts)


def deserialize_ciphertext(params: CkksParams, data: bytes) -> Ciphertext:
    try:
        magic, ver, label, degree, limbs, sbits, nparts, scale, nz, bound, kid = _CT_HEAD.unpack_from(data, 0)
    except struct.error as exc:
        raise CkksError("truncated ciphertext header") from exc
    if magic != CT_MAGIC or ver != FORMAT_VERSION:
        raise CkksError("bad ciphertext magic or version")
    if label.rstrip(b"\0").decode("ascii", "replace") != params.label or degree != params.degree or sbits != params.scale_bits:
        raise CkksError("ciphertext does not match parameter set")
    off = _CT_HEAD.size
    parts = []
    for _ in range(nparts):
        poly, off = R.deserialize(params.ring, data, off)
        if poly.level + 1 != limbs:
            raise CkksError("limb count mismatch")
        parts.append(poly)
    if off != len(data):
        raise CkksError("trailing bytes after ciphertext")
    return _ct(params, parts, scale, kid, nz, bound)


_KEY_HEAD = struct.Struct("<4sB8sIHBB")
KIND_PUBLIC, KIND_SECRET, KIND_SWITCH = 1, 2, 3


def _key_head(p: CkksParams, kind: int) -> bytes:
    return _KEY_HEAD.pack(KEY_MAGIC, FORMAT_VERSION, _label_bytes(p.label), p.degree, p.ring.level_count, p.scale_bits, kind)


def _parse_key_head(params: CkksParams, data: bytes, kind: int) -> int:
    try:
        magic, ver, label, degree, limbs, sbits, k = _KEY_HEAD.unpack_from(data, 0)
    except struct.error as exc:
        raise CkksError("truncated key header") from exc
    if magic != KEY_MAGIC or ver != FORMAT_VERSION or k != kind:
        raise CkksError("bad key magic, version or kind")
    if label.rstrip(b"\0").decode("ascii", "replace") != params.label or degree != params.degree or limbs != params.ring.level_count:
        raise CkksError("key does not match parameter set")
    return _KEY_HEAD.size


def serialize_public_key(pk: PublicKey) -> bytes:
    return _key_head(pk.params, KIND_PUBLIC) + R.serialize(pk.b) + R.serialize(pk.a)


def deserialize_public_key(params: CkksParams, data: bytes) -> PublicKey:
    off = _parse_key_head(params, data, KIND_PUBLIC)
    b, off = R.deserialize(params.ring, data, off)
    a, off = R.deserialize(params.ring, data, off)
    return PublicKey(params, b, a)


def serialize_secret_key(sk: SecretKey) -> bytes:
    return _key_head(sk.params, KIND_SECRET) + sk.key_id + sk.small.astype("<i1").tobytes()


def deserialize_secret_key(params: CkksParams, data: bytes) -> SecretKey:
    off = _parse_key_head(params, data, KIND_SECRET)
    kid = data[off: off + 8]
    small = np.frombuffer(data, dtype="<i1", count=params.degree, offset=off + 8).astype(np.int64)
    if np.any(np.abs(small) > 1):
        raise CkksError("secret key is not ternary")
    moduli = _ext_moduli(params)
    ext = R.get_basis(moduli, params.degree).ntt(R.from_small(params.ring, small, moduli=moduli))
    return SecretKey(params, small, ext, kid)


def serialize_switch_key(params: CkksParams, key: SwitchKey) -> bytes:
    return (_key_head(params, KIND_SWITCH) + key.target_id.ljust(8, b"\0")
            + key.b.astype("<u8").tobytes() + key.a.astype("<u8").tobytes())


def deserialize_switch_key(params: CkksParams, data: bytes) -> SwitchKey:
    off = _parse_key_head(params, data, KIND_SWITCH)
    tid = data[off: off + 8]
    off += 8
    shape = (params.ring.level_count, params.ring.level_count + 1, params.degree)
    n = int(np.prod(shape))
    if len(data) != off + 16 * n:
        raise CkksError("switch key length mismatch")
    b = np.frombuffer(data, dtype="<u8", count=n, offset=off).astype(np.int64).reshape(shape)
    a = np.frombuffer(data, dtype="<u8", count=n, offset=off + 8 * n).astype(np.int64).reshape(shape)
    return SwitchKey(b, a, tid)


def key_sizes(params: CkksParams) -> dict[str, int]:
    """Predicted serialized sizes in bytes, from the format arithmetic alone."""
    d, L = params.degree, params.ring.level_count
    poly = R.serialized_size(d, L)
    return {
        "public_key": _KEY_HEAD.size + 2 * poly,
        "secret_key": _KEY_HEAD.size + 8 + d,
        "relin_key": _KEY_HEAD.size + 8 + 2 * 8 * L * (L + 1) * d,
        "ciphertext": _CT_HEAD.size + 2 * poly,
    }
