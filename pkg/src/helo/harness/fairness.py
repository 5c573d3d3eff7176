"""Scripted adversaries against rank fairness.

The adversary wins if, after any accepted verification, the rank SP holds
for a user differs from the rank of KC's recorded rating.  Every attack is
also required to leave SP's records untouched.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from helo import elo, zkrp
from helo import primitives as P
from helo.ckks import scheme as S
from helo.protocol import HElo, ProtocolConfig, User, user_ids


@dataclass(frozen=True)
class FairnessConfig:
    users: int = 6
    seed: int = 0
    label: str = "toy"
    k_factor: float = 32.0
    matches: int = 3
    degree: int | None = None


@dataclass
class AttackResult:
    name: str
    rejected: bool
    sp_unchanged: bool
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.rejected and self.sp_unchanged


@dataclass
class FairnessReport:
    attacks: list[AttackResult] = field(default_factory=list)
    honest_cycles: int = 0
    win_checks: int = 0
    adversary_won: bool = False
    trace: list[dict] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return not self.adversary_won and self.honest_cycles > 0 and all(a.ok for a in self.attacks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        for a, row in zip(self.attacks, d["attacks"]):
            row["ok"] = a.ok
        return d


@dataclass
class _Held:
    """Everything a user sent in one verification, kept for replay."""

    c_old: bytes
    c_new: bytes
    commitment: bytes
    proof: bytes
    sig: bytes
    rank: str


class FairnessGame:
    def __init__(self, cfg: FairnessConfig):
        if cfg.users < 4 or cfg.users % 2:
            raise ValueError("the scripted game needs an even number of at least four users")
        self.cfg = cfg
        pc = ProtocolConfig(label=cfg.label, k_factor=cfg.k_factor, matches=cfg.matches)
        self.system = HElo(pc, elo.RankLadder.load(), cfg.seed, degree=cfg.degree)
        self.system.init()
        self.ids = user_ids(cfg.users)
        self.report = FairnessReport()
        self.held: dict[str, _Held] = {}

    # -- oracles ------------------------------------------------------------------

    def register(self) -> None:
        for k, uid in enumerate(self.ids):
            if not self.system.register(uid, 1200.0 + 40 * k):
                raise RuntimeError(f"honest registration of {uid} refused")

    def play_round(self, uids: list[str], score: float = 1.0) -> None:
        for a, b in zip(uids[0::2], uids[1::2]):
            self.system.report(a, b, score)

    def play_cycle(self, uids: list[str]) -> None:
        for r in range(self.cfg.matches):
            order = uids[r % 2:] + uids[:r % 2]
            self.play_round(order, score=(1.0, 0.5, 0.0)[r % 3])

    def honest_verify(self, uid: str) -> None:
        user = self.system.users[uid]
        c_old = user.announced_ct
        if not self.system.complete_cycle(uid):
            raise RuntimeError(f"honest verification of {uid} refused: {user.last_refusal}")
        self.held[uid] = _Held(c_old, user.ct, user.commitment, self._sent_proofs[uid], user.sigma, user.rank)
        self.report.honest_cycles += 1
        self.check_win()

    def check_win(self) -> None:
        sys = self.system
        for uid, rec in sys.sp.records.items():
            if rec.announced or uid not in sys.kc.record:
                continue
            self.report.win_checks += 1
            if rec.rank != sys.ladder.rank(sys.kc.record[uid]):
                self.report.adversary_won = True

    def attempt(self, name: str, uid: str, action) -> None:
        """Run one attack; it must be refused and SP's records must not move."""
        before = self.system.sp.snapshot()
        user = self.system.users[uid]
        n_log = len(user.inbox_log)
        action()
        self.system.sp.handle()
        self.system.kc.handle()
        user.handle()
        replies = user.inbox_log[n_log:]
        rejected = bool(replies) and all(r.endswith("_refused") for r in replies)
        after = self.system.sp.snapshot()
        self.report.attacks.append(AttackResult(name, rejected, before == after, user.last_refusal))
        self.check_win()

    # -- scripted attacks ------------------------------------------------------------

    def _send(self, user: User, held: _Held) -> None:
        user.send_verify(held.c_old, held.c_new, held.commitment, held.proof, held.sig, held.rank)

    def _fresh(self, user: User, rank: str | None = None, check: bool = True) -> _Held:
        """Verification material over the user's current attestation, optionally claiming another rank."""
        return _Held(**user.build_verify(rank, check))

    def run(self) -> FairnessReport:
        sys = self.system
        self._sent_proofs: dict[str, bytes] = {}
        sys.net.observers.append(self._watch)
        self.register()
        a, b, c = self.ids[0], self.ids[1], self.ids[2]
        ua, ub, uc = sys.users[a], sys.users[b], sys.users[c]

        # Cycle 1: everyone honest.
        self.play_cycle(self.ids)
        for uid in self.ids:
            self.honest_verify(uid)

        # Early verification: one match into the next cycle, replaying last cycle's accepted material.
        self.play_round(self.ids)
        self.attempt("early verifyNew (cnt < N)", a, lambda: self._send(ua, self.held[a]))
        for r in range(1, self.cfg.matches):
            self.play_round(self.ids[r % 2:] + self.ids[:r % 2], score=0.5)

        # Stale pre-update ciphertext: the previous cycle's accepted message, now that a new announcement exists.
        self.attempt("stale ciphertext replay", a, lambda: self._send(ua, self.held[a]))

        # Forged signatures.
        sys.attest(a)
        honest_a = self._fresh(ua)
        rogue = P.SignatureKeys.generate(b"adversary")
        forged = P.sign(rogue, P.attestation_message(a, honest_a.c_old, honest_a.commitment))
        self.attempt("forged signature (adversary key)", a,
                     lambda: self._send(ua, _Held(**{**asdict(honest_a), "sig": forged})))
        flipped = bytes([honest_a.sig[0] ^ 1]) + honest_a.sig[1:]
        self.attempt("forged signature (bit flip)", a,
                     lambda: self._send(ua, _Held(**{**asdict(honest_a), "sig": flipped})))

        # Cross-user replay of b's attestation.
        sys.attest(b)
        honest_b = self._fresh(ub)
        self.attempt("cross-user signature replay", a,
                     lambda: self._send(ua, _Held(**{**asdict(honest_a), "sig": honest_b.sig})))
        self.attempt("cross-user full replay", a, lambda: self._send(ua, honest_b))

        # Out-of-band proof: honest attestation, proof for a rank the rating is not in.
        true_rank = sys.ladder.rank(ua.rating)
        other = next(l for l in sys.ladder.labels() if l != true_rank)
        sys.attest(a)
        lying = self._fresh(ua, rank=other, check=False)
        self.attempt("out-of-band proof", a, lambda: self._send(ua, lying))

        # Corrupted state: the adversary rewrites c's rating and asks KC to attest it.
        sys.corrupt(c)
        real = uc.rating
        uc.rating = real + 600.0
        self.attempt("corrupted state attestation", c, lambda: uc.request_attestation())
        uc.rating = real
        self.attempt("commitment to recorded rating + 1", c, lambda: uc.request_attestation(math.floor(real) + 1))
        sys.attest(c)
        fake = real + 600.0
        stmt_rank = sys.ladder.rank(fake)
        band = sys.ladder.by_label(stmt_rank)
        seed = int.from_bytes(uc.rng.bytes(32), "little")
        ct = uc.encryptor(fake, seed)
        stmt = zkrp.RangeStatement(sys.public.ppc, P.Commitment(uc.commitment), band.low, band.proof_high,
                                   S.serialize_public_key(uc.pk), ct)
        proof = zkrp.serialize_proof(zkrp.prove(sys.public.pk_sp, stmt, zkrp.Witness(math.floor(fake), 0, seed, fake),
                                                uc.encryptor, uc.rng, check=False))
        substituted = _Held(uc.announced_ct, ct, uc.commitment, proof, uc.sigma, stmt_rank)
        self.attempt("substituted state verifyNew", c, lambda: self._send(uc, substituted))

        # Everyone still completes honestly afterwards.
        for uid in self.ids:
            self.honest_verify(uid)
        self.report.trace = list(sys.net.trace)
        return self.report

    def _watch(self, msg) -> None:
        if msg.kind == "verify_new":
            f = msg.fields()
            self._sent_proofs[f["user"].decode()] = f["proof"]


def run_fairness_game(cfg: FairnessConfig | None = None) -> FairnessReport:
    return FairnessGame(cfg or FairnessConfig()).run()
