"""The three parties: key curator (KC), service provider (SP) and users.

Each role reads its own inbox and answers on the network; none holds a
reference to another role.  Synchronous request/response is modelled by
the `pump` callback, which lets the addressed role drain its inbox before
the caller reads the reply.
"""
from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from helo import circuit, elo, zkrp
from helo import primitives as P
from helo.ckks import scheme as S
from helo.ckks.params import CkksParams
from helo.ckks.scheme import Ciphertext, KeyBundle, PublicKey, SwitchKey
from helo.protocol.messages import KC, SP, Message, Network, f64, text, un_f64, user_role

Pump = Callable[[str], None]


class ProtocolError(RuntimeError):
    """A party refuses to continue (the protocol's bottom symbol)."""


def derive_seed(seed: int, *tags: str) -> int:
    h = hashlib.sha256(str(int(seed)).encode())
    for t in tags:
        h.update(b"/" + t.encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class ProtocolConfig:
    label: str = "toy"
    k_factor: float = 32.0
    matches: int = 3
    noise_amplitude: int = 50
    mode: str = "incremental"
    kernel_degree: int = elo.KERNEL_DEGREE
    switch_cache: int = 48

    def __post_init__(self):
        elo.EloConfig(self.k_factor, self.matches)
        if self.mode not in ("incremental", "batched"):
            raise ValueError("mode must be 'incremental' or 'batched'")
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")


def sample_registration_noise(initial: float, band: elo.Band, amplitude: int, rng: np.random.Generator) -> int:
    """Uniform integer noise in [-amplitude, amplitude] that keeps initial + noise inside the band."""
    lo = max(-amplitude, math.ceil(band.low - initial))
    hi = min(amplitude, math.ceil(band.high - initial) - 1)
    if lo > hi:
        raise ProtocolError("no admissible noise keeps the rating inside its band")
    return int(rng.integers(lo, hi + 1))


def encryptor_for(pk: PublicKey) -> zkrp.Encryptor:
    """Deterministic re-encryption from the seed r', as the ciphertext relation needs."""
    def enc(value: float, seed: int) -> bytes:
        return S.serialize_ciphertext(S.encrypt(pk, [value], seed))
    return enc


# ---------------------------------------------------------------------------
# key curator
# ---------------------------------------------------------------------------

class KeyCurator:
    def __init__(self, params: CkksParams, ppc: P.CommitParams, seed: int, net: Network):
        self.params = params
        self.ppc = ppc
        self.seed = seed
        self.net = net
        self.signing = P.SignatureKeys.generate(derive_seed(seed, "kc-sign").to_bytes(32, "little"))
        self.keys: dict[str, KeyBundle] = {}
        self.record: dict[str, float] = {}  # M: latest announced plaintext rating per user
        self.announced: dict[str, bytes] = {}
        self.announce_count: dict[str, int] = {}
        self._rng = np.random.default_rng(derive_seed(seed, "kc-rng"))

    @property
    def verify_key(self) -> bytes:
        return self.signing.verify_key

    def provision(self, uid: str) -> KeyBundle:
        if uid in self.keys:
            raise ProtocolError(f"keys for {uid} already exist")
        kb = S.keygen(self.params, derive_seed(self.seed, "he-key", uid))
        self.keys[uid] = kb
        return kb

    def handle(self) -> None:
        while self.net.pending(KC):
            msg = self.net.receive(KC)
            getattr(self, "_on_" + msg.kind)(msg)

    def _on_refresh_request(self, msg: Message) -> None:
        f = msg.fields()
        uid = f["user"].decode()
        ct = S.deserialize_ciphertext(self.params, f["ct"])
        out = S.refresh(ct, self.keys[uid], self._rng)
        self.net.send(KC, SP, "refresh_response", {"user": f["user"], "ct": S.serialize_ciphertext(out)})

    def _on_switch_key_request(self, msg: Message) -> None:
        f = msg.fields()
        src, dst = f["source"].decode(), f["target"].decode()
        key = S.make_switch_key(self.params, self.keys[src].sk.ext, self.keys[dst].sk,
                                derive_seed(self.seed, "switch", src, dst))
        self.net.send(KC, SP, "switch_key", {"source": f["source"], "target": f["target"],
                                             "key": S.serialize_switch_key(self.params, key)})

    def _on_announce(self, msg: Message) -> None:
        f = msg.fields()
        uid = f["user"].decode()
        ct = S.deserialize_ciphertext(self.params, f["ct"])
        # The circuit cannot clamp; KC applies the oracle's [0, 4000] clamp to the plaintext it announces.
        rating = elo.clamp(float(S.decrypt(self.keys[uid].sk, ct)[0]))
        self.record[uid] = rating
        self.announced[uid] = f["ct"]
        self.announce_count[uid] = self.announce_count.get(uid, 0) + 1
        self.net.send(KC, user_role(uid), "announcement", {"rating": f64(rating), "ct": f["ct"]})

    def check_attestation(self, uid: str, ct: bytes, commitment: bytes, value: int, blind: int) -> str | None:
        """Reason for refusal, or None when KC may sign."""
        if uid not in self.record:
            return "no announced rating"
        if ct != self.announced[uid]:
            return "ciphertext is not the latest announced one"
        m = self.record[uid]
        if m < 0:
            return "negative rating"
        if value != math.floor(m):
            return "committed value differs from the recorded rating"
        if not P.open_commitment(self.ppc, P.Commitment(commitment), value, blind):
            return "commitment does not open"
        return None

    def _on_attest_request(self, msg: Message) -> None:
        f = msg.fields()
        uid = f["user"].decode()
        reason = self.check_attestation(uid, f["ct"], f["commitment"], int.from_bytes(f["value"], "little", signed=True),
                                        int.from_bytes(f["blind"], "little"))
        if reason is not None:
            self.net.send(KC, user_role(uid), "attest_refused", {"reason": text(reason)})
            return
        sig = P.sign(self.signing, P.attestation_message(uid, f["ct"], f["commitment"]))
        self.net.send(KC, user_role(uid), "attestation", {"sig": sig})


# ---------------------------------------------------------------------------
# service provider
# ---------------------------------------------------------------------------

@dataclass
class SpRecord:
    rank: str
    ct: bytes = field(repr=False)
    cnt: int = 1
    announced: bool = False
    played: int = 0
    real_sum: float = 0.0
    exp_sum: Ciphertext | None = field(default=None, repr=False)
    own_scaled: Ciphertext | None = field(default=None, repr=False)
    pending: list = field(default_factory=list, repr=False)

    def snapshot(self) -> tuple:
        return (self.rank, hashlib.sha256(self.ct).hexdigest(), self.cnt, self.announced, self.played, self.real_sum)


class ServiceProvider:
    def __init__(self, params: CkksParams, cfg: ProtocolConfig, ladder: elo.RankLadder, ppc: P.CommitParams,
                 proof_keys: tuple[zkrp.ProofKey, zkrp.ProofKey], vk_kc: bytes, net: Network, pump: Pump):
        self.params = params
        self.cfg = cfg
        self.ladder = ladder
        self.ppc = ppc
        self.pk_sp, self.vk_sp = proof_keys
        self.vk_kc = vk_kc
        self.net = net
        self.pump = pump
        self.kernel = circuit.Kernel.default(cfg.kernel_degree)
        self.records: dict[str, SpRecord] = {}
        self.public_keys: dict[str, tuple[PublicKey, bytes]] = {}
        self.relin_keys: dict[str, SwitchKey] = {}
        self._switch: OrderedDict[tuple[str, str], SwitchKey] = OrderedDict()
        self._parsed: dict[str, tuple[bytes, Ciphertext]] = {}

    # -- keys ---------------------------------------------------------------

    def install_keys(self, uid: str, pk: PublicKey, rlk: SwitchKey) -> None:
        self.public_keys[uid] = (pk, S.serialize_public_key(pk))
        self.relin_keys[uid] = rlk

    def _switch_key(self, src: str, dst: str) -> SwitchKey:
        key = (src, dst)
        if key in self._switch:
            self._switch.move_to_end(key)
            return self._switch[key]
        self.net.send(SP, KC, "switch_key_request", {"source": text(src), "target": text(dst)})
        self.pump(KC)
        f = self.net.receive(SP, "switch_key").fields()
        sk = S.deserialize_switch_key(self.params, f["key"])
        self._switch[key] = sk
        while len(self._switch) > self.cfg.switch_cache:
            self._switch.popitem(last=False)
        return sk

    def _ct(self, uid: str) -> Ciphertext:
        rec = self.records[uid]
        cached = self._parsed.get(uid)
        if cached is None or cached[0] is not rec.ct:
            cached = (rec.ct, S.deserialize_ciphertext(self.params, rec.ct))
            self._parsed[uid] = cached
        return cached[1]

    def _refresh(self, uid: str) -> circuit.Refresher:
        def go(ct: Ciphertext) -> Ciphertext:
            self.net.send(SP, KC, "refresh_request", {"user": text(uid), "ct": S.serialize_ciphertext(ct)})
            self.pump(KC)
            return S.deserialize_ciphertext(self.params, self.net.receive(SP, "refresh_response").fields()["ct"])
        return go

    # -- registration -------------------------------------------------------

    def statement(self, uid: str, commitment: bytes, rank: str, ct: bytes) -> zkrp.RangeStatement:
        band = self.ladder.by_label(rank)
        return zkrp.RangeStatement(self.ppc, P.Commitment(commitment), band.low, band.proof_high,
                                   self.public_keys[uid][1], ct)

    def _parse_user_ct(self, uid: str, data: bytes) -> Ciphertext | None:
        try:
            ct = S.deserialize_ciphertext(self.params, data)
        except S.CkksError:
            return None
        if ct.key_id != self.public_keys[uid][0].key_id or ct.level != self.params.max_level:
            return None
        return ct

    def handle(self) -> None:
        while self.net.pending(SP):
            msg = self.net.receive(SP)
            getattr(self, "_on_" + msg.kind)(msg)

    def _on_register(self, msg: Message) -> None:
        f = msg.fields()
        uid = f["user"].decode()
        reason = self._register_check(uid, f)
        if reason is not None:
            self.net.send(SP, user_role(uid), "register_refused", {"reason": text(reason)})
            return
        self.records[uid] = SpRecord(rank=f["rank"].decode(), ct=f["ct"])
        self.net.send(SP, user_role(uid), "register_ok", {"rank": f["rank"], "cnt": bytes([1])})

    def _register_check(self, uid: str, f: dict[str, bytes]) -> str | None:
        if uid in self.records:
            return "already registered"
        if uid not in self.public_keys:
            return "unknown user"
        rank = f["rank"].decode()
        if rank not in self.ladder.labels():
            return "unknown rank"
        if self._parse_user_ct(uid, f["ct"]) is None:
            return "malformed ciphertext"
        stmt = self.statement(uid, f["commitment"], rank, f["ct"])
        if not zkrp.verify(self.vk_sp, stmt, f["proof"]):
            return "range proof rejected"
        return None

    # -- matchmaking and updates -------------------------------------------

    def available(self, uid: str) -> bool:
        rec = self.records.get(uid)
        return rec is not None and not rec.announced

    def matchmake(self, uid: str, rng: np.random.Generator) -> str | None:
        """A uniformly random available opponent of the same rank, or None."""
        if not self.available(uid):
            return None
        rank = self.records[uid].rank
        pool = sorted(j for j, r in self.records.items() if j != uid and r.rank == rank and not r.announced)
        if not pool:
            return None
        return pool[int(rng.integers(len(pool)))]

    def _on_match_report(self, msg: Message) -> None:
        f = msg.fields()
        i, j = f["a"].decode(), f["b"].decode()
        s = un_f64(f["score"])
        reason = None
        if i == j:
            reason = "self match"
        elif not (self.available(i) and self.available(j)):
            reason = "participant not registered or awaiting verification"
        elif s not in elo.OUTCOMES:
            reason = "invalid outcome"
        elif self.records[i].rank != self.records[j].rank:
            reason = "participants hold different ranks"
        if reason is not None:
            self.net.send(SP, "game", "match_refused", {"reason": text(reason)})
            return
        self._fold_pair(i, j, s)
        self.net.send(SP, "game", "match_ok", {"a": f["a"], "b": f["b"]})
        for uid in (i, j):
            if self.records[uid].played == self.cfg.matches:
                self._finalize(uid)

    def _fold_pair(self, i: str, j: str, s: float) -> None:
        """Count the match for both players and fold in their expected scores.

        Incremental mode evaluates the kernel once, under i's key, and hands j
        the complement 1 - E moved to j's key at the bottom level, where key
        switching is cheap.  Batched mode queues the opponents' ciphertexts.
        """
        ri, rj = self.records[i], self.records[j]
        for rec, score in ((ri, s), (rj, 1.0 - s)):
            rec.played += 1
            rec.cnt = min(self.cfg.matches, rec.played + 1)
            rec.real_sum += score
        if self.cfg.mode == "batched":
            ri.pending.append((j, self._ct(j)))
            rj.pending.append((i, self._ct(i)))
            return
        term = self._expected(i, ri, j, self._ct(j))
        mirrored = S.plain_sub(1.0, S.key_switch(term, self._switch_key(i, j)))
        ri.exp_sum = term if ri.exp_sum is None else S.eval_add(ri.exp_sum, term)
        rj.exp_sum = mirrored if rj.exp_sum is None else S.eval_add(rj.exp_sum, mirrored)

    def _expected(self, uid: str, rec: SpRecord, opp: str, opp_ct: Ciphertext) -> Ciphertext:
        if rec.own_scaled is None:
            rec.own_scaled = circuit.scaled(self._ct(uid))
        opp_scaled = S.key_switch(circuit.scaled(opp_ct), self._switch_key(opp, uid))
        return circuit.expected_term(rec.own_scaled, opp_scaled, self.kernel, self.relin_keys[uid])

    def _finalize(self, uid: str) -> None:
        rec = self.records[uid]
        if self.cfg.mode == "batched":
            for opp, opp_ct in rec.pending:
                term = self._expected(uid, rec, opp, opp_ct)
                rec.exp_sum = term if rec.exp_sum is None else S.eval_add(rec.exp_sum, term)
            rec.pending = []
        new = circuit.finish(self._ct(uid), rec.exp_sum, rec.real_sum, self.cfg.k_factor, self._refresh(uid))
        rec.ct = S.serialize_ciphertext(new)
        rec.announced = True
        rec.cnt = self.cfg.matches
        rec.exp_sum = rec.own_scaled = None
        self.net.send(SP, KC, "announce", {"user": text(uid), "ct": rec.ct})
        self.pump(KC)

    # -- rating verification -------------------------------------------------

    def _on_verify_new(self, msg: Message) -> None:
        f = msg.fields()
        uid = f["user"].decode()
        reason = self._verify_check(uid, f)
        if reason is not None:
            self.net.send(SP, user_role(uid), "verify_refused", {"reason": text(reason)})
            return
        rec = self.records[uid]
        rec.ct = f["c_new"]
        rec.rank = f["rank"].decode()
        rec.cnt = 1
        rec.played = 0
        rec.real_sum = 0.0
        rec.announced = False
        self.net.send(SP, user_role(uid), "verify_ok", {"rank": f["rank"]})

    def _verify_check(self, uid: str, f: dict[str, bytes]) -> str | None:
        rec = self.records.get(uid)
        if rec is None:
            return "unknown user"
        if rec.cnt != self.cfg.matches or not rec.announced:
            return "update cycle not complete"
        if f["c_old"] != rec.ct:
            return "stale ciphertext"
        if f["rank"].decode() not in self.ladder.labels():
            return "unknown rank"
        if not P.verify(self.vk_kc, f["sig"], P.attestation_message(uid, f["c_old"], f["commitment"])):
            return "attestation rejected"
        if self._parse_user_ct(uid, f["c_new"]) is None:
            return "malformed ciphertext"
        stmt = self.statement(uid, f["commitment"], f["rank"].decode(), f["c_new"])
        if not zkrp.verify(self.vk_sp, stmt, f["proof"]):
            return "range proof rejected"
        return None

    def snapshot(self) -> dict[str, tuple]:
        return {uid: rec.snapshot() for uid, rec in self.records.items()}


# ---------------------------------------------------------------------------
# user
# ---------------------------------------------------------------------------

class User:
    def __init__(self, uid: str, params: CkksParams, pk: PublicKey, ppc: P.CommitParams, pk_sp: zkrp.ProofKey,
                 ladder: elo.RankLadder, cfg: ProtocolConfig, seed: int, net: Network):
        self.uid = uid
        self.role = user_role(uid)
        self.params = params
        self.pk = pk
        self.ppc = ppc
        self.pk_sp = pk_sp
        self.ladder = ladder
        self.cfg = cfg
        self.net = net
        self.rng = np.random.default_rng(derive_seed(seed, "user", uid))
        self.encryptor = encryptor_for(pk)
        self.rating: float | None = None
        self.rank: str | None = None
        self.ct: bytes = b""
        self.announced_ct: bytes = b""
        self.commitment: bytes = b""
        self.opening: tuple[int, int] | None = None
        self.sigma: bytes = b""
        self.registered = False
        self.inbox_log: list[str] = []
        self.last_refusal = ""

    def _scalar(self) -> int:
        return P.random_scalar(self.rng)

    def _seed(self) -> int:
        return int.from_bytes(self.rng.bytes(32), "little")

    def prove_rating(self, rating: float, rank: str, check: bool = True
                     ) -> tuple[bytes, bytes, bytes, tuple[int, int]]:
        """(commitment, ciphertext, proof, opening) for a rating claimed to lie in `rank`'s band."""
        band = self.ladder.by_label(rank)
        value = math.floor(rating)
        blind = self._scalar()
        commitment = P.commit(self.ppc, value, blind).point
        seed = self._seed()
        ct = self.encryptor(rating, seed)
        stmt = zkrp.RangeStatement(self.ppc, P.Commitment(commitment), band.low, band.proof_high,
                                   S.serialize_public_key(self.pk), ct)
        w = zkrp.Witness(value, blind, seed, rating)
        proof = zkrp.prove(self.pk_sp, stmt, w, self.encryptor, self.rng, check=check)
        return commitment, ct, zkrp.serialize_proof(proof), (value, blind)

    def register(self, initial: float, rank: str, noise: int | None = None) -> None:
        """Noise the assigned rating, commit, encrypt, prove, and send to SP; refuses locally if out of band."""
        band = self.ladder.by_label(rank)
        if not band.contains(initial):
            raise ProtocolError("initial rating is not inside the initial rank")
        if noise is None:
            noise = sample_registration_noise(initial, band, self.cfg.noise_amplitude, self.rng)
        rating = initial + noise
        if not band.contains(rating):
            raise ProtocolError("noised rating left the initial rank; refusing to register")
        commitment, ct, proof, opening = self.prove_rating(rating, rank)
        self.rating, self.rank, self.ct = rating, rank, ct
        self.commitment, self.opening = commitment, opening
        self.net.send(self.role, SP, "register", {"user": text(self.uid), "rank": text(rank), "commitment": commitment,
                                                  "ct": ct, "proof": proof})

    def handle(self) -> None:
        while self.net.pending(self.role):
            msg = self.net.receive(self.role)
            self.inbox_log.append(msg.kind)
            f = msg.fields()
            if msg.kind == "register_ok":
                self.registered = True
            elif msg.kind == "announcement":
                self.rating = un_f64(f["rating"])
                self.announced_ct = f["ct"]
                self.sigma = b""
            elif msg.kind == "attestation":
                self.sigma = f["sig"]
            elif msg.kind == "verify_ok":
                self.rank = f["rank"].decode()
            elif msg.kind.endswith("_refused"):
                self.last_refusal = f["reason"].decode()

    def request_attestation(self, value: int | None = None) -> None:
        """Commit to the floor of the new rating and ask KC to sign (id, announced ciphertext, commitment)."""
        if self.rating is None or not self.announced_ct:
            raise ProtocolError("no announced rating to attest")
        v = math.floor(self.rating) if value is None else int(value)
        blind = self._scalar()
        self.commitment = P.commit(self.ppc, v, blind).point
        self.opening = (v, blind)
        self.net.send(self.role, KC, "attest_request", {
            "user": text(self.uid), "ct": self.announced_ct, "commitment": self.commitment,
            "value": v.to_bytes(8, "little", signed=True), "blind": blind.to_bytes(32, "little")})

    def build_verify(self, rank: str | None = None, check: bool = True) -> dict[str, bytes | str]:
        """Fresh encryption of the new rating with a proof for its rank, alongside the attested ciphertext, commitment and signature."""
        if not self.sigma or self.opening is None or self.rating is None:
            raise ProtocolError("no attestation held")
        rank = rank or self.ladder.rank(self.rating)
        band = self.ladder.by_label(rank)
        value, blind = self.opening
        seed = self._seed()
        ct = self.encryptor(self.rating, seed)
        stmt = zkrp.RangeStatement(self.ppc, P.Commitment(self.commitment), band.low, band.proof_high,
                                   S.serialize_public_key(self.pk), ct)
        proof = zkrp.prove(self.pk_sp, stmt, zkrp.Witness(value, blind, seed, self.rating), self.encryptor, self.rng,
                           check=check)
        return {"c_old": self.announced_ct, "c_new": ct, "commitment": self.commitment,
                "proof": zkrp.serialize_proof(proof), "sig": self.sigma, "rank": rank}

    def verify_new(self) -> None:
        m = self.build_verify()
        self.ct = m["c_new"]
        self.send_verify(**m)

    def send_verify(self, c_old: bytes, c_new: bytes, commitment: bytes, proof: bytes, sig: bytes, rank: str) -> None:
        self.net.send(self.role, SP, "verify_new", {"user": text(self.uid), "c_old": c_old, "c_new": c_new,
                                                    "commitment": commitment, "proof": proof, "sig": sig,
                                                    "rank": text(rank)})
