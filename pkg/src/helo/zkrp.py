"""Range proofs for Pedersen-committed integers, bound to a CKKS ciphertext.

The proof shows a <= v < b by decomposing both v - a and v - (b - 2**n)
into n = ceil(log2(b - a)) committed bits.  Each bit carries a
Cramer-Damgard-Schoenmakers OR-proof that it commits to 0 or 1, and a
Schnorr proof on H shows that the weighted bit commitments recompose the
statement's commitment.  Everything is made non-interactive with one
Fiat-Shamir challenge.

Ciphertext binding is weaker than a proof of correct encryption: the
transcript absorbs the ciphertext digest and a hash commitment to the
encryption randomness.  A public verifier therefore rejects any proof
moved onto a different ciphertext or commitment, but only a designated
verifier who learns the opening (see `verify_binding`) can confirm the
ciphertext actually encrypts the committed value.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from helo import primitives as P
from helo.primitives import ORDER, CommitParams, Commitment

PROOF_MAGIC = b"HRPF"
PROOF_VERSION = 1
RELATIONS = ("range", "rccc")

Encryptor = Callable[[float, int], bytes]


class ProofError(ValueError):
    """The prover refuses: the witness does not satisfy the relation."""


@dataclass(frozen=True)
class ProofKey:
    """Transparent parameters; prover and verifier hold the same bytes."""

    relation: str
    domain: bytes

    def to_bytes(self) -> bytes:
        return struct.pack("<B", RELATIONS.index(self.relation)) + self.domain


def setup(relation: str = "rccc", seed: bytes = b"helo-nizk-v1") -> tuple[ProofKey, ProofKey]:
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    domain = hashlib.sha256(b"helo/nizk-setup" + struct.pack("<H", len(seed)) + seed + relation.encode()).digest()
    key = ProofKey(relation, domain)
    return key, key


@dataclass(frozen=True)
class RangeStatement:
    pp: CommitParams
    commitment: Commitment
    low: int
    high: int
    public_key: bytes = b""
    ciphertext: bytes = b""

    def __post_init__(self):
        if not (isinstance(self.low, int) and isinstance(self.high, int)) or not 0 <= self.low < self.high:
            raise ValueError("range bounds must be integers with 0 <= a < b")

    @property
    def bits(self) -> int:
        return bit_count(self.low, self.high)

    def encode(self) -> bytes:
        parts = [self.pp.to_bytes(), self.commitment.point, struct.pack("<QQ", self.low, self.high),
                 hashlib.sha256(self.public_key).digest(), hashlib.sha256(self.ciphertext).digest()]
        return b"".join(struct.pack("<I", len(p)) + p for p in parts)


@dataclass(frozen=True)
class Witness:
    """v and its commitment blind r; for the ciphertext relation also the encrypted value and seed r'."""

    value: int
    blind: int
    enc_seed: int = 0
    plaintext: float | None = None


@dataclass(frozen=True)
class BitProof:
    commitment: bytes
    a0: bytes
    a1: bytes
    e0: int
    z0: int
    z1: int


@dataclass(frozen=True)
class Decomposition:
    bits: tuple[BitProof, ...]
    t: bytes
    z: int


@dataclass(frozen=True)
class RangeProof:
    lower: Decomposition
    upper: Decomposition
    binding: bytes

    @property
    def element_count(self) -> int:
        return sum(6 * len(d.bits) + 2 for d in (self.lower, self.upper)) + 1


def bit_count(low: int, high: int) -> int:
    return max(1, math.ceil(math.log2(high - low)))


def predicted_elements(low: int, high: int) -> int:
    """Group elements plus scalars: two decompositions of n bits (3 + 3 each) with a Schnorr pair, plus the tag."""
    return 12 * bit_count(low, high) + 5


def binding_tag(key: ProofKey, stmt: RangeStatement, w: Witness) -> bytes:
    """Hash commitment to (v, plaintext, r') tied to the statement's ciphertext and commitment."""
    pt = b"" if w.plaintext is None else struct.pack("<d", float(w.plaintext))
    return hashlib.sha256(b"helo/rccc-bind" + key.domain + stmt.encode() + struct.pack("<Q", w.value)
                          + pt + int(w.enc_seed).to_bytes(32, "little")).digest()


def _transcript(key: ProofKey, stmt: RangeStatement, binding: bytes) -> P.Transcript:
    t = P.Transcript(b"helo/range-proof/" + key.to_bytes())
    t.absorb(b"statement", stmt.encode())
    t.absorb(b"binding", binding)
    return t


def _offsets(stmt: RangeStatement) -> tuple[int, int]:
    return stmt.low, stmt.high - (1 << stmt.bits)


def _shifted(stmt: RangeStatement, offset: int) -> bytes:
    """C - offset*G, a commitment to v - offset under the same blind."""
    if offset >= 0:
        return P.point_sub(stmt.commitment.point, P.point_mul(offset, stmt.pp.g))
    return P.point_add(stmt.commitment.point, P.point_mul(-offset, stmt.pp.g))


class _Prover:
    def __init__(self, pp: CommitParams, target: int, blind: int, n: int, rng):
        self.pp, self.n, self.rng = pp, n, rng
        self.bits = [(target >> i) & 1 for i in range(n)]
        self.blinds = [P.random_scalar(rng) for _ in range(n)]
        self.rest = (blind - sum(r << i for i, r in enumerate(self.blinds))) % ORDER
        self.commits = [P.commit_point(pp, b, r) for b, r in zip(self.bits, self.blinds)]
        self.k = [P.random_scalar(rng) for _ in range(n)]
        self.sim = [(P.random_scalar(rng), P.random_scalar(rng)) for _ in range(n)]
        self.a = []
        for i in range(n):
            ys = (self.commits[i], P.point_sub(self.commits[i], pp.g))
            e_f, z_f = self.sim[i]
            fake = 1 - self.bits[i]
            a_fake = P.point_sub(P.point_mul(z_f, pp.h), P.point_mul(e_f, ys[fake]))
            a_real = P.point_mul(self.k[i], pp.h)
            self.a.append((a_real, a_fake) if self.bits[i] == 0 else (a_fake, a_real))
        self.k_rest = P.random_scalar(rng)
        self.t = P.point_mul(self.k_rest, pp.h)

    def absorb(self, t: P.Transcript, tag: bytes) -> None:
        for c, (a0, a1) in zip(self.commits, self.a):
            t.absorb(tag + b"/bit", c + a0 + a1)
        t.absorb(tag + b"/rest", self.t)

    def respond(self, e: int) -> Decomposition:
        out = []
        for i in range(self.n):
            e_f, z_f = self.sim[i]
            e_r = (e - e_f) % ORDER
            z_r = (self.k[i] + e_r * self.blinds[i]) % ORDER
            if self.bits[i] == 0:
                e0, z0, z1 = e_r, z_r, z_f
            else:
                e0, z0, z1 = e_f, z_f, z_r
            out.append(BitProof(self.commits[i], self.a[i][0], self.a[i][1], e0, z0, z1))
        return Decomposition(tuple(out), self.t, (self.k_rest + e * self.rest) % ORDER)


def prove(key: ProofKey, stmt: RangeStatement, w: Witness, encryptor: Encryptor | None = None,
          rng: np.random.Generator | None = None, check: bool = True) -> RangeProof:
    """Proof that the committed value lies in [low, high) (and matches the ciphertext).

    With `check` (the default) the prover refuses any witness outside the
    relation.  Turning it off exists only so the soundness harness can try
    to forge proofs.
    """
    if check:
        if not P.open_commitment(stmt.pp, stmt.commitment, w.value, w.blind):
            raise ProofError("commitment does not open to the witness")
        if not stmt.low <= w.value < stmt.high:
            raise ProofError(f"value outside [{stmt.low}, {stmt.high})")
        if key.relation == "rccc" and stmt.ciphertext:
            if encryptor is None or w.plaintext is None:
                raise ProofError("ciphertext relation needs the encrypted value and an encryptor")
            if math.floor(w.plaintext) != w.value:
                raise ProofError("committed value is not the floor of the encrypted value")
            if encryptor(w.plaintext, w.enc_seed) != stmt.ciphertext:
                raise ProofError("ciphertext does not encrypt the witness under r'")
    n = stmt.bits
    lo_off, hi_off = _offsets(stmt)
    mask = (1 << n) - 1
    lower = _Prover(stmt.pp, (w.value - lo_off) & mask, w.blind, n, rng)
    upper = _Prover(stmt.pp, (w.value - hi_off) & mask, w.blind, n, rng)
    tag = binding_tag(key, stmt, w)
    t = _transcript(key, stmt, tag)
    lower.absorb(t, b"lower")
    upper.absorb(t, b"upper")
    e = t.challenge(b"e")
    return RangeProof(lower.respond(e), upper.respond(e), tag)


def _absorb_decomp(t: P.Transcript, d: Decomposition, tag: bytes) -> None:
    for bp in d.bits:
        t.absorb(tag + b"/bit", bp.commitment + bp.a0 + bp.a1)
    t.absorb(tag + b"/rest", d.t)


def _check_decomp(pp: CommitParams, d: Decomposition, target: bytes, e: int) -> bool:
    acc = P.IDENTITY
    for bp in reversed(d.bits):
        acc = P.point_add(acc, acc)
        acc = P.point_add(acc, bp.commitment)
    for bp in d.bits:
        if not P.is_point(bp.commitment):
            return False
        e1 = (e - bp.e0) % ORDER
        y0 = bp.commitment
        y1 = P.point_sub(bp.commitment, pp.g)
        if P.point_mul(bp.z0, pp.h) != P.point_add(bp.a0, P.point_mul(bp.e0, y0)):
            return False
        if P.point_mul(bp.z1, pp.h) != P.point_add(bp.a1, P.point_mul(e1, y1)):
            return False
    residual = P.point_sub(target, acc)
    return P.point_mul(d.z, pp.h) == P.point_add(d.t, P.point_mul(e, residual))


def _well_formed(stmt: RangeStatement, proof: RangeProof) -> bool:
    n = stmt.bits
    # Only the points multiplied by challenges need a subgroup check: a torsion
    # component in a0, a1 or t can never cancel against z*H.
    if not P.is_point(stmt.commitment.point):
        return False
    for d in (proof.lower, proof.upper):
        if len(d.bits) != n or len(d.t) != 32 or not 0 <= d.z < ORDER:
            return False
        for bp in d.bits:
            # Subgroup membership of bp.commitment is checked where it is used, in _check_decomp.
            if len(bp.commitment) != 32 or len(bp.a0) != 32 or len(bp.a1) != 32:
                return False
            if not all(0 <= s < ORDER for s in (bp.e0, bp.z0, bp.z1)):
                return False
    return isinstance(proof.binding, bytes) and len(proof.binding) == 32


def verify(key: ProofKey, stmt: RangeStatement, proof: RangeProof | bytes) -> bool:
    """Public check; malformed input yields False rather than an exception."""
    try:
        if isinstance(proof, (bytes, bytearray)):
            proof = deserialize_proof(bytes(proof))
        if not _well_formed(stmt, proof):
            return False
        t = _transcript(key, stmt, proof.binding)
        _absorb_decomp(t, proof.lower, b"lower")
        _absorb_decomp(t, proof.upper, b"upper")
        e = t.challenge(b"e")
        lo_off, hi_off = _offsets(stmt)
        return (_check_decomp(stmt.pp, proof.lower, _shifted(stmt, lo_off), e)
                and _check_decomp(stmt.pp, proof.upper, _shifted(stmt, hi_off), e))
    except (ValueError, TypeError, struct.error, Exception):  # noqa: BLE001 - any malformed input is a rejection
        return False


def verify_binding(key: ProofKey, stmt: RangeStatement, proof: RangeProof, w: Witness,
                   encryptor: Encryptor) -> bool:
    """Designated check for a party given the opening: the tag, the commitment and the ciphertext all agree."""
    if w.plaintext is None or math.floor(w.plaintext) != w.value:
        return False
    if not P.open_commitment(stmt.pp, stmt.commitment, w.value, w.blind):
        return False
    if binding_tag(key, stmt, w) != proof.binding:
        return False
    return encryptor(w.plaintext, w.enc_seed) == stmt.ciphertext


def bind_ciphertext(key: ProofKey, stmt: RangeStatement, w: Witness, encryptor: Encryptor) -> bytes:
    """Binding tag for a consistent (commitment, ciphertext) pair; refuses a mismatched witness."""
    if w.plaintext is None or math.floor(w.plaintext) != w.value:
        raise ProofError("committed value is not the floor of the encrypted value")
    if not P.open_commitment(stmt.pp, stmt.commitment, w.value, w.blind):
        raise ProofError("commitment does not open to the witness")
    if encryptor(w.plaintext, w.enc_seed) != stmt.ciphertext:
        raise ProofError("ciphertext does not encrypt the witness under r'")
    return binding_tag(key, stmt, w)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_HEAD = struct.Struct("<4sBH")


def _pack_decomp(d: Decomposition) -> bytes:
    out = []
    for bp in d.bits:
        out += [bp.commitment, bp.a0, bp.a1, P.scalar_bytes(bp.e0), P.scalar_bytes(bp.z0), P.scalar_bytes(bp.z1)]
    out += [d.t, P.scalar_bytes(d.z)]
    return b"".join(out)


def serialize_proof(proof: RangeProof) -> bytes:
    return (_HEAD.pack(PROOF_MAGIC, PROOF_VERSION, len(proof.lower.bits))
            + _pack_decomp(proof.lower) + _pack_decomp(proof.upper) + proof.binding)


def _scalar(b: bytes) -> int:
    v = int.from_bytes(b, "little")
    if v >= ORDER:
        raise ValueError("non-canonical scalar")
    return v


def deserialize_proof(data: bytes) -> RangeProof:
    magic, ver, n = _HEAD.unpack_from(data, 0)
    if magic != PROOF_MAGIC or ver != PROOF_VERSION:
        raise ValueError("not a range proof")
    want = _HEAD.size + 2 * (n * 6 + 2) * 32 + 32
    if len(data) != want:
        raise ValueError(f"proof length {len(data)} != {want}")
    words = [data[i:i + 32] for i in range(_HEAD.size, len(data), 32)]
    pos = 0

    def decomp() -> Decomposition:
        nonlocal pos
        bits = []
        for _ in range(n):
            c, a0, a1, e0, z0, z1 = words[pos:pos + 6]
            bits.append(BitProof(c, a0, a1, _scalar(e0), _scalar(z0), _scalar(z1)))
            pos += 6
        t, z = words[pos], _scalar(words[pos + 1])
        pos += 2
        return Decomposition(tuple(bits), t, z)

    lower = decomp()
    upper = decomp()
    return RangeProof(lower, upper, words[pos])


def serialize_statement(stmt: RangeStatement) -> bytes:
    """Self-contained statement bytes for the CLI tooling."""
    seed = stmt.pp.seed
    fields = [seed, stmt.commitment.point, stmt.public_key, stmt.ciphertext]
    return (b"HRST" + bytes([1]) + struct.pack("<QQ", stmt.low, stmt.high)
            + b"".join(struct.pack("<I", len(f)) + f for f in fields))


def deserialize_statement(data: bytes) -> RangeStatement:
    if data[:5] != b"HRST\x01":
        raise ValueError("not a range statement")
    low, high = struct.unpack_from("<QQ", data, 5)
    pos = 21
    fields = []
    for _ in range(4):
        (n,) = struct.unpack_from("<I", data, pos)
        fields.append(data[pos + 4:pos + 4 + n])
        pos += 4 + n
    if pos != len(data):
        raise ValueError("trailing bytes in statement")
    seed, point, pk, ct = fields
    return RangeStatement(CommitParams.setup(seed), Commitment(point), low, high, pk, ct)
