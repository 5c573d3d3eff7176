"""RNS polynomial arithmetic over Z_Q[X]/(X^d + 1).

Polynomials are stored as one int64 row per prime limb.  The
representation flag (coefficient or NTT domain) is explicit state and every
binary operation checks it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import gmpy2
import numpy as np

from helo import _kernels as K

SERIAL_MAGIC = b"RNSP"
SERIAL_VERSION = 1


class RingError(ValueError):
    """Raised on domain, level or parameter mismatches."""


# ---------------------------------------------------------------------------
# primes and NTT tables
# ---------------------------------------------------------------------------

def find_ntt_primes(bits: int, degree: int, count: int, exclude: Sequence[int] = (),
                    above: bool = False) -> list[int]:
    """Primes q = 1 (mod 2*degree) nearest 2**bits, alternating below and above.

    With `above`, only primes greater than 2**bits are returned.
    """
    if bits > K.MAX_MODULUS_BITS:
        raise RingError(f"primes above {K.MAX_MODULUS_BITS} bits are not supported")
    m = 2 * degree
    centre = 1 << bits
    base = centre - (centre % m) + 1
    below, above_c = base, base + m
    found: list[int] = []
    taken = set(exclude)
    while len(found) < count:
        for cand in ((above_c,) if above else (below, above_c)):
            if len(found) >= count:
                break
            if cand.bit_length() <= K.MAX_MODULUS_BITS and cand > m and cand not in taken and gmpy2.is_prime(cand, 40):
                found.append(cand)
                taken.add(cand)
        below -= m
        above_c += m
        if (above or below <= m) and above_c.bit_length() > K.MAX_MODULUS_BITS:
            raise RingError(f"only {len(found)} of {count} NTT primes near 2^{bits} fit in {K.MAX_MODULUS_BITS} bits")
    return found


def _bitrev(x: int, bits: int) -> int:
    return int(format(x, f"0{bits}b")[::-1], 2) if bits else 0


@lru_cache(maxsize=None)
def primitive_root(q: int, order: int) -> int:
    """Smallest-base primitive `order`-th root of unity mod q (order a power of two)."""
    if (q - 1) % order:
        raise RingError(f"{q} has no {order}-th roots of unity")
    for x in range(2, q):
        w = pow(x, (q - 1) // order, q)
        if pow(w, order // 2, q) == q - 1:
            return w
    raise RingError("no primitive root found")


@dataclass(frozen=True)
class _PrimeTable:
    q: int
    psi: np.ndarray
    psi_f: np.ndarray
    ipsi: np.ndarray
    ipsi_f: np.ndarray
    ninv: int


@lru_cache(maxsize=None)
def _prime_table(q: int, degree: int) -> _PrimeTable:
    bits = degree.bit_length() - 1
    psi = primitive_root(q, 2 * degree)
    ipsi = pow(psi, -1, q)
    pw = [1] * degree
    ipw = [1] * degree
    for i in range(1, degree):
        pw[i] = pw[i - 1] * psi % q
        ipw[i] = ipw[i - 1] * ipsi % q
    rev = [_bitrev(i, bits) for i in range(degree)]
    psi_rev = np.array([pw[r] for r in rev], dtype=np.int64)
    ipsi_rev = np.array([ipw[r] for r in rev], dtype=np.int64)
    return _PrimeTable(
        q=q,
        psi=psi_rev,
        psi_f=psi_rev.astype(np.float64) / q,
        ipsi=ipsi_rev,
        ipsi_f=ipsi_rev.astype(np.float64) / q,
        ninv=pow(degree, -1, q),
    )


@dataclass(frozen=True)
class Basis:
    """Stacked per-prime tables for a tuple of moduli, fed straight to the kernels."""

    moduli: tuple[int, ...]
    degree: int
    qs: np.ndarray = field(repr=False)
    qinv: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    psi_f: np.ndarray = field(repr=False)
    ipsi: np.ndarray = field(repr=False)
    ipsi_f: np.ndarray = field(repr=False)
    ninv: np.ndarray = field(repr=False)
    ninv_f: np.ndarray = field(repr=False)

    def ntt(self, a: np.ndarray) -> np.ndarray:
        out = np.array(a, dtype=np.int64, copy=True)
        K.ntt_forward(out, self.qs, self.psi, self.psi_f)
        return out

    def intt(self, a: np.ndarray) -> np.ndarray:
        out = np.array(a, dtype=np.int64, copy=True)
        K.ntt_inverse(out, self.qs, self.ipsi, self.ipsi_f, self.ninv, self.ninv_f)
        return out

    def reduce_scalar(self, k: int) -> np.ndarray:
        return np.array([k % q for q in self.moduli], dtype=np.int64)

    def sub_basis(self, idx: Sequence[int]) -> "Basis":
        return get_basis(tuple(self.moduli[i] for i in idx), self.degree)


@lru_cache(maxsize=256)
def get_basis(moduli: tuple[int, ...], degree: int) -> Basis:
    tabs = [_prime_table(q, degree) for q in moduli]
    qs = np.array(moduli, dtype=np.int64)
    ninv = np.array([t.ninv for t in tabs], dtype=np.int64)
    return Basis(
        moduli=tuple(moduli),
        degree=degree,
        qs=qs,
        qinv=1.0 / qs.astype(np.float64),
        psi=np.stack([t.psi for t in tabs]),
        psi_f=np.stack([t.psi_f for t in tabs]),
        ipsi=np.stack([t.ipsi for t in tabs]),
        ipsi_f=np.stack([t.ipsi_f for t in tabs]),
        ninv=ninv,
        ninv_f=ninv.astype(np.float64) / qs,
    )


# ---------------------------------------------------------------------------
# parameters and polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RingParams:
    """Ring dimension plus the ciphertext modulus chain q_0..q_L.

    `special_moduli` are the extra key-switching primes; they never appear
    in a ciphertext.
    """

    degree: int
    moduli: tuple[int, ...]
    special_moduli: tuple[int, ...] = ()

    def __post_init__(self):
        d = self.degree
        if d < 16 or d & (d - 1):
            raise RingError(f"degree must be a power of two >= 16, got {d}")
        allp = self.moduli + self.special_moduli
        if not self.moduli:
            raise RingError("empty modulus chain")
        if len(set(allp)) != len(allp):
            raise RingError("moduli must be pairwise distinct")
        for q in allp:
            if q % (2 * d) != 1:
                raise RingError(f"modulus {q} is not 1 mod {2 * d}")
            if q.bit_length() > K.MAX_MODULUS_BITS:
                raise RingError(f"modulus {q} exceeds {K.MAX_MODULUS_BITS} bits")

    @property
    def max_level(self) -> int:
        return len(self.moduli) - 1

    @property
    def level_count(self) -> int:
        return len(self.moduli)

    def basis(self, level: int | None = None) -> Basis:
        level = self.max_level if level is None else level
        return get_basis(self.moduli[: level + 1], self.degree)

    def extended_basis(self, level: int | None = None) -> Basis:
        level = self.max_level if level is None else level
        return get_basis(self.moduli[: level + 1] + self.special_moduli, self.degree)

    def modulus(self, level: int | None = None) -> int:
        level = self.max_level if level is None else level
        out = 1
        for q in self.moduli[: level + 1]:
            out *= q
        return out

    @classmethod
    def generate(cls, degree: int, first_bits: int, mid_bits: int, mid_count: int,
                 special_bits: int = 0, special_count: int = 0) -> "RingParams":
        first = find_ntt_primes(first_bits, degree, 1)
        mids = find_ntt_primes(mid_bits, degree, mid_count, exclude=first, above=True)
        special = find_ntt_primes(special_bits, degree, special_count, exclude=first + mids) if special_count else []
        return cls(degree, tuple(first + mids), tuple(special))


@dataclass(frozen=True)
class RnsPolynomial:
    params: RingParams
    coeffs: np.ndarray
    is_ntt: bool

    def __post_init__(self):
        c = self.coeffs
        if c.ndim != 2 or c.shape[1] != self.params.degree or c.dtype != np.int64:
            raise RingError(f"bad coefficient array shape {c.shape} / dtype {c.dtype}")
        if not 1 <= c.shape[0] <= self.params.level_count:
            raise RingError("limb count outside modulus chain")

    @property
    def level(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def basis(self) -> Basis:
        return self.params.basis(self.level)

    def with_coeffs(self, coeffs: np.ndarray, is_ntt: bool | None = None) -> "RnsPolynomial":
        return RnsPolynomial(self.params, coeffs, self.is_ntt if is_ntt is None else is_ntt)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RnsPolynomial):
            return NotImplemented
        return (self.params == other.params and self.is_ntt == other.is_ntt
                and self.coeffs.shape == other.coeffs.shape and bool(np.array_equal(self.coeffs, other.coeffs)))

    __hash__ = None  # type: ignore[assignment]

    def in_canonical_range(self) -> bool:
        qs = self.basis.qs[:, None]
        return bool(np.all(self.coeffs >= 0) and np.all(self.coeffs < qs))

    def to_bytes(self) -> bytes:
        return serialize(self)


def from_integers(params: RingParams, values: Sequence[int] | np.ndarray, level: int | None = None) -> RnsPolynomial:
    """Coefficient-domain polynomial from signed integer coefficients (Python ints allowed)."""
    level = params.max_level if level is None else level
    moduli = params.moduli[: level + 1]
    vals = list(values)
    if len(vals) != params.degree:
        raise RingError("need exactly `degree` coefficients")
    arr = np.asarray(vals, dtype=object) if any(abs(int(v)) >= 1 << 62 for v in vals) else np.asarray(vals, dtype=np.int64)
    rows = [np.asarray(arr % q, dtype=np.int64) for q in moduli]
    return RnsPolynomial(params, np.stack(rows), False)


def from_small(params: RingParams, small: np.ndarray, level: int | None = None, moduli: Sequence[int] | None = None) -> np.ndarray:
    """Reduce a small signed int64 vector into every limb; returns the raw array."""
    if moduli is None:
        level = params.max_level if level is None else level
        moduli = params.moduli[: level + 1]
    return np.stack([np.mod(small, q) for q in moduli]).astype(np.int64)


def constant(params: RingParams, c: int, level: int | None = None) -> RnsPolynomial:
    vals = [0] * params.degree
    vals[0] = c
    return from_integers(params, vals, level)


def crt_reconstruct(p: RnsPolynomial, centered: bool = True) -> list[int]:
    """Exact big-integer coefficients of a coefficient-domain polynomial."""
    if p.is_ntt:
        p = ntt_inverse(p)
    moduli = p.params.moduli[: p.level + 1]
    Q = 1
    for q in moduli:
        Q *= q
    acc = np.zeros(p.params.degree, dtype=object)
    for i, q in enumerate(moduli):
        qhat = Q // q
        factor = qhat * pow(qhat, -1, q)
        acc = acc + p.coeffs[i].astype(object) * factor
    acc = acc % Q
    if centered:
        half = Q // 2
        acc = np.where(acc > half, acc - Q, acc)
    return [int(x) for x in acc]


def _check_pair(a: RnsPolynomial, b: RnsPolynomial) -> None:
    if a.params != b.params:
        raise RingError("ring parameter mismatch")
    if a.level != b.level:
        raise RingError(f"level mismatch: {a.level} vs {b.level}")
    if a.is_ntt != b.is_ntt:
        raise RingError("representation mismatch (coefficient vs NTT)")


def ntt_forward(p: RnsPolynomial) -> RnsPolynomial:
    if p.is_ntt:
        raise RingError("polynomial already in NTT domain")
    return p.with_coeffs(p.basis.ntt(p.coeffs), True)


def ntt_inverse(p: RnsPolynomial) -> RnsPolynomial:
    if not p.is_ntt:
        raise RingError("polynomial already in coefficient domain")
    return p.with_coeffs(p.basis.intt(p.coeffs), False)


def ring_add(a: RnsPolynomial, b: RnsPolynomial) -> RnsPolynomial:
    _check_pair(a, b)
    return a.with_coeffs(K.add(a.coeffs, b.coeffs, a.basis.qs))


def ring_sub(a: RnsPolynomial, b: RnsPolynomial) -> RnsPolynomial:
    _check_pair(a, b)
    return a.with_coeffs(K.sub(a.coeffs, b.coeffs, a.basis.qs))


def ring_neg(a: RnsPolynomial) -> RnsPolynomial:
    return a.with_coeffs(K.neg(a.coeffs, a.basis.qs))


def ring_mul(a: RnsPolynomial, b: RnsPolynomial) -> RnsPolynomial:
    _check_pair(a, b)
    if not a.is_ntt:
        raise RingError("ring_mul requires NTT-domain operands")
    bs = a.basis
    return a.with_coeffs(K.mul(a.coeffs, b.coeffs, bs.qs, bs.qinv))


def ring_mul_scalar(a: RnsPolynomial, k: int) -> RnsPolynomial:
    bs = a.basis
    return a.with_coeffs(K.mul_scalar(a.coeffs, bs.reduce_scalar(k), bs.qs, bs.qinv))


def mod_drop(p: RnsPolynomial, level: int) -> RnsPolynomial:
    """Discard limbs above `level`; the value is kept modulo the smaller Q."""
    if level > p.level or level < 0:
        raise RingError(f"cannot drop from level {p.level} to {level}")
    if level == p.level:
        return p
    return p.with_coeffs(np.ascontiguousarray(p.coeffs[: level + 1]))


def divide_round_top(coeffs: np.ndarray, basis: Basis, is_ntt: bool) -> np.ndarray:
    """round(x / q_top) on the remaining limbs; the shared core of rescale and mod-down."""
    top = basis.moduli[-1]
    low = basis.sub_basis(range(len(basis.moduli) - 1))
    last = coeffs[-1]
    if is_ntt:
        last = basis.sub_basis([len(basis.moduli) - 1]).intt(last[None, :])[0]
    t = K.lift_centered(last, np.int64(top), low.qs)
    if is_ntt:
        t = low.ntt(t)
    inv = np.array([pow(top, -1, q) for q in low.moduli], dtype=np.int64)
    return K.sub_scale(np.ascontiguousarray(coeffs[:-1]), t, low.qs, inv, inv.astype(np.float64) / low.qs)


def drop_limb(p: RnsPolynomial) -> RnsPolynomial:
    """Remove the top limb dividing by q_top with rounding (the rescale primitive)."""
    if p.level < 1:
        raise RingError("cannot drop the last limb")
    return p.with_coeffs(divide_round_top(p.coeffs, p.basis, p.is_ntt))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gaussian_bound(sigma: float) -> int:
    return int(np.ceil(6 * sigma))


def small_ternary(degree: int, seed) -> np.ndarray:
    return _rng(seed).integers(-1, 2, size=degree, dtype=np.int64)


def small_gaussian(degree: int, sigma: float, seed) -> np.ndarray:
    if sigma <= 0:
        raise RingError("sigma must be positive")
    rng = _rng(seed)
    bound = gaussian_bound(sigma)
    out = np.rint(rng.normal(0.0, sigma, size=degree))
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = np.rint(rng.normal(0.0, sigma, size=int(bad.sum())))
        bad = np.abs(out) > bound
    return out.astype(np.int64)


def sample_uniform(params: RingParams, seed, level: int | None = None, is_ntt: bool = True) -> RnsPolynomial:
    level = params.max_level if level is None else level
    rng = _rng(seed)
    rows = [rng.integers(0, q, size=params.degree, dtype=np.int64) for q in params.moduli[: level + 1]]
    return RnsPolynomial(params, np.stack(rows), is_ntt)


def sample_ternary(params: RingParams, seed, level: int | None = None) -> RnsPolynomial:
    return RnsPolynomial(params, from_small(params, small_ternary(params.degree, seed), level), False)


def sample_gaussian(params: RingParams, seed, sigma: float = 3.2, level: int | None = None) -> RnsPolynomial:
    return RnsPolynomial(params, from_small(params, small_gaussian(params.degree, sigma, seed), level), False)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sBBIH")


def serialize(p: RnsPolynomial) -> bytes:
    limbs = p.level + 1
    head = _HEADER.pack(SERIAL_MAGIC, SERIAL_VERSION, int(p.is_ntt), p.params.degree, limbs)
    moduli = struct.pack(f"<{limbs}Q", *p.params.moduli[:limbs])
    return head + moduli + p.coeffs.astype("<u8").tobytes()


def serialized_size(degree: int, limbs: int) -> int:
    return _HEADER.size + 8 * limbs + 8 * limbs * degree


def deserialize(params: RingParams, data: bytes, offset: int = 0) -> tuple[RnsPolynomial, int]:
    """Parse one polynomial at `offset`; returns it and the offset just past it."""
    try:
        magic, version, flag, degree, limbs = _HEADER.unpack_from(data, offset)
    except struct.error as exc:
        raise RingError("truncated polynomial header") from exc
    if magic != SERIAL_MAGIC or version != SERIAL_VERSION:
        raise RingError("bad polynomial magic or version")
    if degree != params.degree or not 1 <= limbs <= params.level_count:
        raise RingError("polynomial does not match ring parameters")
    offset += _HEADER.size
    moduli = struct.unpack_from(f"<{limbs}Q", data, offset)
    if tuple(moduli) != params.moduli[:limbs]:
        raise RingError("modulus chain mismatch")
    offset += 8 * limbs
    n = limbs * degree
    if len(data) < offset + 8 * n:
        raise RingError("truncated polynomial body")
    body = np.frombuffer(data, dtype="<u8", count=n, offset=offset).astype(np.int64).reshape(limbs, degree)
    p = RnsPolynomial(params, body, bool(flag))
    if not p.in_canonical_range():
        raise RingError("coefficient outside canonical range")
    return p, offset + 8 * n
