"""The whole system in one process: setup, registration, matches, and the attest/verify cycle."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from helo import elo, zkrp
from helo import primitives as P
from helo.ckks import scheme as S
from helo.ckks.params import CkksParams, params_for
from helo.protocol.messages import GAME, KC, SP, Network, f64, text, user_role
from helo.protocol.roles import (KeyCurator, ProtocolConfig, ProtocolError, ServiceProvider, User, derive_seed)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PublicSetup:
    """What Init hands to everyone."""

    vk_kc: bytes
    ppc: P.CommitParams
    pk_sp: zkrp.ProofKey
    vk_sp: zkrp.ProofKey


class HElo:
    """One live deployment.  Construct, call `init` once, then register users and report matches."""

    def __init__(self, cfg: ProtocolConfig | None = None, ladder: elo.RankLadder | None = None, seed: int = 0,
                 params: CkksParams | None = None, degree: int | None = None):
        self.cfg = cfg or ProtocolConfig()
        self.ladder = ladder or elo.RankLadder.load()
        self.seed = int(seed)
        self.params = params or params_for(self.cfg.label, degree=degree)
        self.net = Network()
        self.public: PublicSetup | None = None
        self.kc: KeyCurator | None = None
        self.sp: ServiceProvider | None = None
        self.users: dict[str, User] = {}

    # -- setup ----------------------------------------------------------------

    def init(self) -> PublicSetup:
        if self.public is not None:
            raise ProtocolError("system already initialised")
        tag = derive_seed(self.seed, "setup").to_bytes(32, "little")
        ppc = P.CommitParams.setup(b"helo-commitments/" + tag)
        pk_sp, vk_sp = zkrp.setup("rccc", b"helo-nizk/" + tag)
        self.kc = KeyCurator(self.params, ppc, self.seed, self.net)
        self.sp = ServiceProvider(self.params, self.cfg, self.ladder, ppc, (pk_sp, vk_sp), self.kc.verify_key,
                                  self.net, self.pump)
        self.public = PublicSetup(self.kc.verify_key, ppc, pk_sp, vk_sp)
        return self.public

    def _live(self) -> None:
        if self.public is None:
            raise ProtocolError("system not initialised")

    def pump(self, role: str) -> None:
        """Let `role` drain its inbox."""
        if role == KC:
            self.kc.handle()
        elif role == SP:
            self.sp.handle()
        elif role in self._by_role:
            self._by_role[role].handle()

    @property
    def _by_role(self) -> dict[str, User]:
        return {u.role: u for u in self.users.values()}

    # -- users ----------------------------------------------------------------

    def new_user(self, uid: str) -> User:
        """KC provisions HE keys; SP receives the public and relinearisation keys."""
        self._live()
        if uid in self.users:
            raise ProtocolError(f"user {uid} already exists")
        kb = self.kc.provision(uid)
        self.sp.install_keys(uid, kb.pk, kb.rlk)
        user = User(uid, self.params, kb.pk, self.public.ppc, self.public.pk_sp, self.ladder, self.cfg, self.seed,
                    self.net)
        self.users[uid] = user
        return user

    def register(self, uid: str, initial: float, rank: str | None = None, noise: int | None = None) -> bool:
        """Honest registration flow; returns whether SP accepted."""
        user = self.users.get(uid) or self.new_user(uid)
        rank = rank or self.ladder.rank(initial)
        user.register(initial, rank, noise)
        self.sp.handle()
        user.handle()
        return user.registered

    # -- matches ------------------------------------------------------------------

    def report(self, a: str, b: str, score_a: float) -> bool:
        """Game server reports a result; SP folds it in and may trigger announcements."""
        self._live()
        self.net.send(GAME, SP, "match_report", {"a": text(a), "b": text(b), "score": f64(score_a)})
        self.sp.handle()
        ok = self.net.receive(GAME).kind == "match_ok"
        for uid in (a, b):
            if uid in self.users:
                self.users[uid].handle()
        return ok

    def matchmake(self, uid: str, rng: np.random.Generator) -> str | None:
        return self.sp.matchmake(uid, rng)

    # -- cycle completion -------------------------------------------------------

    def attest(self, uid: str, value: int | None = None) -> bool:
        user = self.users[uid]
        user.request_attestation(value)
        self.kc.handle()
        user.handle()
        return bool(user.sigma)

    def verify_new(self, uid: str) -> bool:
        user = self.users[uid]
        user.verify_new()
        self.sp.handle()
        user.handle()
        return user.inbox_log[-1] == "verify_ok"

    def complete_cycle(self, uid: str) -> bool:
        """Attest then verifyNew; True when SP accepted the new rank."""
        if not self.attest(uid):
            return False
        ok = self.verify_new(uid)
        if ok:
            self.check_fairness(uid)
        return ok

    def awaiting(self) -> list[str]:
        return sorted(uid for uid, rec in self.sp.records.items() if rec.announced)

    def check_fairness(self, uid: str) -> None:
        """After an accepted verifyNew, SP's rank must equal the rank of KC's recorded rating."""
        want = self.ladder.rank(self.kc.record[uid])
        got = self.sp.records[uid].rank
        if want != got:
            raise AssertionError(f"fairness violated for {uid}: SP holds {got}, KC record gives {want}")

    # -- oracles for the security games ------------------------------------------

    def corrupt(self, uid: str) -> User:
        """Hand the adversary a user's full state."""
        return self.users[uid]

    def decrypt_for_test(self, uid: str) -> float:
        """Ground truth for tests: KC-side decryption of SP's stored ciphertext."""
        ct = S.deserialize_ciphertext(self.params, self.sp.records[uid].ct)
        return float(S.decrypt(self.kc.keys[uid].sk, ct)[0])

    def sp_message_log(self) -> list[bytes]:
        return [m for m in self._sp_wire]

    def record_sp_wire(self) -> None:
        """Start keeping every byte string SP sends or receives."""
        self._sp_wire: list[bytes] = []

        def obs(msg):
            if SP in (msg.sender, msg.recipient):
                self._sp_wire.append(msg.wire)
        self.net.observers.append(obs)


def user_ids(count: int) -> list[str]:
    return [f"u{i:04d}" for i in range(count)]


__all__ = ["HElo", "PublicSetup", "ProtocolConfig", "ProtocolError", "user_ids", "KC", "SP", "GAME", "user_role"]
