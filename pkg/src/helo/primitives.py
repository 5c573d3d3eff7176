"""Pedersen commitments, Ed25519 signatures and a Fiat-Shamir transcript.

Group arithmetic runs in the prime-order subgroup of edwards25519 through
libsodium.  Points are handled as their 32-byte encodings; the identity is
special-cased because libsodium refuses to multiply down to it.

The commitment blinding generator is the standard base point, which has a
fast fixed-base multiplication; the value generator is hashed onto the
curve, so nobody knows its logarithm to the base.
"""
from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass

import nacl.bindings as nb
import nacl.exceptions
import nacl.signing
import numpy as np

ORDER = 2 ** 252 + 27742317777372353535851937790883648493
IDENTITY = bytes([1]) + bytes(31)
BASE = nb.crypto_scalarmult_ed25519_base_noclamp((1).to_bytes(32, "little"))
POINT_BYTES = 32
SCALAR_BYTES = 32
VALUE_LIMIT = 2 ** 32
ATTESTATION_VERSION = 1


class PrimitiveError(ValueError):
    pass


# ---------------------------------------------------------------------------
# group helpers
# ---------------------------------------------------------------------------

def scalar_bytes(k: int) -> bytes:
    return (k % ORDER).to_bytes(SCALAR_BYTES, "little")


def point_add(p: bytes, q: bytes) -> bytes:
    return nb.crypto_core_ed25519_add(p, q)


def point_sub(p: bytes, q: bytes) -> bytes:
    return nb.crypto_core_ed25519_sub(p, q)


def point_mul(k: int, p: bytes) -> bytes:
    k %= ORDER
    if k == 0 or p == IDENTITY:
        return IDENTITY
    if k == 1:
        return p
    if p == BASE:
        return nb.crypto_scalarmult_ed25519_base_noclamp(scalar_bytes(k))
    return nb.crypto_scalarmult_ed25519_noclamp(scalar_bytes(k), p)


def is_point(p: bytes) -> bool:
    """A canonical encoding of a prime-order subgroup element (identity included)."""
    if not isinstance(p, (bytes, bytearray)) or len(p) != POINT_BYTES:
        return False
    return p == IDENTITY or nb.crypto_core_ed25519_is_valid_point(bytes(p))


def hash_to_point(domain: bytes, label: bytes) -> bytes:
    """Elligator map of a domain-separated hash; the discrete log is unknown to everyone."""
    ctr = 0
    while True:
        h = hashlib.sha256(b"helo/h2p" + struct.pack("<HI", len(domain), ctr) + domain + label).digest()
        p = nb.crypto_core_ed25519_from_uniform(h)
        if p != IDENTITY:
            return p
        ctr += 1


def random_scalar(rng: np.random.Generator | None = None) -> int:
    if rng is None:
        return secrets.randbelow(ORDER)
    return int.from_bytes(rng.bytes(64), "little") % ORDER


# ---------------------------------------------------------------------------
# commitments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommitParams:
    seed: bytes
    g: bytes
    h: bytes

    @classmethod
    def setup(cls, seed: bytes = b"helo-commitments-v1") -> "CommitParams":
        return cls(seed, hash_to_point(seed, b"g"), BASE)

    def to_bytes(self) -> bytes:
        return struct.pack("<H", len(self.seed)) + self.seed + self.g + self.h

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CommitParams":
        (n,) = struct.unpack_from("<H", blob)
        if len(blob) != 2 + n + 64:
            raise PrimitiveError("bad commitment parameter length")
        out = cls(blob[2:2 + n], blob[2 + n:2 + n + 32], blob[2 + n + 32:])
        if not (is_point(out.g) and is_point(out.h)) or out != cls.setup(out.seed):
            raise PrimitiveError("commitment generators do not match their seed")
        return out


@dataclass(frozen=True)
class Commitment:
    point: bytes

    def __add__(self, other: "Commitment") -> "Commitment":
        return Commitment(point_add(self.point, other.point))

    def __sub__(self, other: "Commitment") -> "Commitment":
        return Commitment(point_sub(self.point, other.point))

    def to_bytes(self) -> bytes:
        return self.point


@dataclass(frozen=True)
class Opening:
    value: int
    blind: int


def commit_point(pp: CommitParams, v: int, r: int) -> bytes:
    return point_add(point_mul(v, pp.g), point_mul(r, pp.h))


def commit(pp: CommitParams, v: int, r: int) -> Commitment:
    """v*G + r*H for an integer value 0 <= v < 2**32."""
    if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < VALUE_LIMIT:
        raise PrimitiveError(f"commitment value {v!r} outside [0, 2**32)")
    return Commitment(commit_point(pp, int(v), int(r)))


def open_commitment(pp: CommitParams, c: Commitment, v: int, r: int) -> bool:
    if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < VALUE_LIMIT:
        return False
    return c.point == commit_point(pp, int(v), int(r))


# ---------------------------------------------------------------------------
# signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignatureKeys:
    signing: nacl.signing.SigningKey
    verify_key: bytes

    @classmethod
    def generate(cls, seed: bytes | None = None) -> "SignatureKeys":
        if seed is not None and len(seed) != 32:
            seed = hashlib.sha256(seed).digest()
        sk = nacl.signing.SigningKey(seed) if seed is not None else nacl.signing.SigningKey.generate()
        return cls(sk, bytes(sk.verify_key))


def sign(keys: SignatureKeys, message: bytes) -> bytes:
    return keys.signing.sign(message).signature


def verify(vk: bytes, signature: bytes, message: bytes) -> bool:
    try:
        nacl.signing.VerifyKey(bytes(vk)).verify(bytes(message), bytes(signature))
        return True
    except (nacl.exceptions.BadSignatureError, nacl.exceptions.ValueError, nacl.exceptions.TypeError, TypeError):
        return False


def attestation_message(user_id: str | bytes, ciphertext: bytes, commitment: bytes) -> bytes:
    """version || len(id) || id || len(ct) || ct || len(C) || C with u32 little-endian lengths."""
    uid = user_id.encode() if isinstance(user_id, str) else bytes(user_id)
    out = [bytes([ATTESTATION_VERSION])]
    for field in (uid, ciphertext, commitment):
        out.append(struct.pack("<I", len(field)))
        out.append(bytes(field))
    return b"".join(out)


# ---------------------------------------------------------------------------
# Fiat-Shamir
# ---------------------------------------------------------------------------

class Transcript:
    """Running SHA-512 over length-prefixed, labelled messages.

    Each challenge is folded back into the state, so successive challenges
    with the same label still differ.
    """

    def __init__(self, domain: bytes):
        self._h = hashlib.sha512()
        self._absorb(b"domain", domain)

    def _absorb(self, label: bytes, data: bytes) -> None:
        self._h.update(struct.pack("<I", len(label)) + label + struct.pack("<I", len(data)) + data)

    def absorb(self, label: bytes, data: bytes) -> "Transcript":
        self._absorb(b"msg:" + label, bytes(data))
        return self

    def absorb_int(self, label: bytes, value: int) -> "Transcript":
        return self.absorb(label, int(value).to_bytes(16, "little", signed=True))

    def challenge(self, label: bytes) -> int:
        fork = self._h.copy()
        fork.update(b"challenge:" + label)
        c = int.from_bytes(fork.digest(), "little") % ORDER
        self._absorb(b"chal:" + label, scalar_bytes(c))
        return c

    def copy(self) -> "Transcript":
        t = Transcript.__new__(Transcript)
        t._h = self._h.copy()
        return t


def transcript_challenge(t: Transcript, label: bytes) -> int:
    return t.challenge(label)
