"""What the service provider can learn: a byte-level leak scanner and a challenge game.

The statistical distinguishers are a falsification battery.  Passing them
shows no gross leak in SP's view; it does not prove indistinguishability.
"""
from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from helo import elo
from helo.ckks import scheme as S
from helo.harness.simulate import SimConfig, Simulation
from helo.protocol import SP, HElo, ProtocolConfig, ProtocolError
from helo.protocol.messages import Message

SMALL_FIELD = 256


# ---------------------------------------------------------------------------
# byte scanner
# ---------------------------------------------------------------------------

def binary_patterns(rating: float, scale_bits: int = 40) -> list[bytes]:
    """Encodings a careless implementation might put on the wire."""
    pats = [struct.pack("<d", rating), struct.pack(">d", rating)]
    scaled = round(rating * 2 ** scale_bits)
    if scaled < 2 ** 63:
        pats.append(struct.pack("<q", scaled))
    return pats


def text_patterns(rating: float) -> list[bytes]:
    return sorted({repr(float(rating)).encode(), f"{rating:.2f}".encode(), f"{rating:.6f}".encode()})


@dataclass
class LeakHit:
    seq: int
    kind: str
    field: str
    pattern: str


class LeakScanner:
    """Watches every message to or from SP for encodings of ratings SP must not know.

    Ratings SP legitimately holds (the initial rating it assigned) are
    excluded; everything a user or KC holds privately is searched for.
    """

    def __init__(self, system: HElo, public_ratings: dict[str, float] | None = None):
        self.system = system
        self.public = public_ratings if public_ratings is not None else {}
        self.seen: set[float] = set()
        self.hits: list[LeakHit] = []
        self.messages = 0
        self.bytes = 0
        self.extra: list[float] = []
        system.net.observers.append(self.observe)

    def private_ratings(self) -> set[float]:
        out = set(self.seen)
        for uid, user in self.system.users.items():
            if user.rating is not None and user.rating != self.public.get(uid):
                out.add(float(user.rating))
        out.update(float(v) for v in self.system.kc.record.values())
        out.update(self.extra)
        self.seen = out
        return out

    def observe(self, msg: Message) -> None:
        if SP not in (msg.sender, msg.recipient):
            return
        self.messages += 1
        self.bytes += len(msg.wire)
        ratings = self.private_ratings()
        fields = msg.fields()
        scale_bits = self.system.params.scale_bits
        for r in ratings:
            for pat in binary_patterns(r, scale_bits):
                if pat in msg.wire:
                    self.hits.append(LeakHit(msg.seq, msg.kind, "*", pat.hex()))
            for name, value in fields.items():
                if len(value) < SMALL_FIELD:
                    for pat in text_patterns(r):
                        if pat in value:
                            self.hits.append(LeakHit(msg.seq, msg.kind, name, pat.decode()))

    def scan_trace(self) -> None:
        """The audit trace is SP-visible too; look for decimal renderings there."""
        doc = self.system.net.trace_json().encode()
        for r in self.private_ratings():
            for pat in text_patterns(r):
                if pat in doc:
                    self.hits.append(LeakHit(-1, "trace", "json", pat.decode()))

    @property
    def clean(self) -> bool:
        return not self.hits


# ---------------------------------------------------------------------------
# challenge game
# ---------------------------------------------------------------------------

class ChallengeOracle:
    """The guard rules of the game: equal-rank pairs only, and no corrupting the challenged."""

    def __init__(self, ladder: elo.RankLadder):
        self.ladder = ladder
        self.challenged: set[str] = set()
        self.corrupted: set[str] = set()

    def challenge(self, uid: str, r0: float, r1: float) -> bool:
        if uid in self.corrupted or uid in self.challenged:
            return False
        if self.ladder.rank(r0) != self.ladder.rank(r1):
            return False
        self.challenged.add(uid)
        return True

    def corrupt(self, uid: str) -> bool:
        if uid in self.challenged:
            return False
        self.corrupted.add(uid)
        return True


@dataclass(frozen=True)
class HiddenRatingConfig:
    trials: int = 10_000
    seed: int = 0
    label: str = "toy"
    degree: int | None = None
    low_rating: float = 1000.5
    high_rating: float = 1499.5
    scan_users: int = 8
    scan_cycles: int = 2


@dataclass
class Distinguisher:
    name: str
    advantage: float
    sigma: float

    @property
    def within(self) -> bool:
        return self.advantage <= 3 * self.sigma


@dataclass
class HiddenRatingReport:
    trials: int
    guard_cross_rank_refused: bool
    guard_corrupt_challenged_refused: bool
    guard_challenge_corrupted_refused: bool
    honest_challenge_accepted: bool
    distinguishers: list[Distinguisher] = field(default_factory=list)
    scan_messages: int = 0
    scan_bytes: int = 0
    leaks: list[LeakHit] = field(default_factory=list)
    sp_decrypt_refused: bool = False

    @property
    def max_advantage(self) -> float:
        return max((d.advantage for d in self.distinguishers), default=0.0)

    @property
    def guards_hold(self) -> bool:
        return (self.guard_cross_rank_refused and self.guard_corrupt_challenged_refused
                and self.guard_challenge_corrupted_refused and self.honest_challenge_accepted)

    @property
    def passed(self) -> bool:
        return (self.guards_hold and all(d.within for d in self.distinguishers) and not self.leaks
                and self.sp_decrypt_refused)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_advantage"] = self.max_advantage
        d["passed"] = self.passed
        return d


def view_features(commitment: bytes, ct: bytes, proof: bytes) -> np.ndarray:
    """Cheap statistics of SP's view of one challenged registration."""
    cb = np.frombuffer(ct, dtype=np.uint8)
    pb = np.frombuffer(proof, dtype=np.uint8)
    last = int.from_bytes(ct[-8:], "little")
    return np.array([
        cb.mean(),
        pb.mean(),
        float(np.unpackbits(np.frombuffer(commitment, dtype=np.uint8)).sum()),
        float(commitment[0] & 1),
        float(last & 0xFFFF),
        float(np.unpackbits(pb[:256]).sum()),
        float(len(ct)),
        float(len(proof)),
        float(pb[-32:].astype(np.int64).sum()),
        float(cb[64:1088].astype(np.int64).sum() % 2),
    ])


FEATURE_NAMES = ("ciphertext byte mean", "proof byte mean", "commitment weight", "commitment low bit",
                 "last coefficient low word", "proof head weight", "ciphertext length", "proof length",
                 "binding tag sum", "ciphertext parity")


def _threshold_advantage(train_x, train_y, test_x, test_y) -> float:
    m0, m1 = train_x[train_y == 0].mean(), train_x[train_y == 1].mean()
    cut = (m0 + m1) / 2
    guess = (test_x > cut).astype(int) if m1 > m0 else (test_x <= cut).astype(int)
    return abs(2 * float((guess == test_y).mean()) - 1)


def _centroid_advantage(train_x, train_y, test_x, test_y) -> float:
    mu, sd = train_x.mean(axis=0), train_x.std(axis=0)
    sd[sd == 0] = 1.0
    z_train, z_test = (train_x - mu) / sd, (test_x - mu) / sd
    c0, c1 = z_train[train_y == 0].mean(axis=0), z_train[train_y == 1].mean(axis=0)
    guess = (np.linalg.norm(z_test - c1, axis=1) < np.linalg.norm(z_test - c0, axis=1)).astype(int)
    return abs(2 * float((guess == test_y).mean()) - 1)


def distinguish(features: np.ndarray, bits: np.ndarray) -> list[Distinguisher]:
    """Train on the first half of trials, score on the second."""
    half = len(bits) // 2
    tx, ty, vx, vy = features[:half], bits[:half], features[half:], bits[half:]
    sigma = 1.0 / math.sqrt(len(vy))
    out = [Distinguisher(name, _threshold_advantage(tx[:, k], ty, vx[:, k], vy), sigma)
           for k, name in enumerate(FEATURE_NAMES)]
    out.append(Distinguisher("nearest centroid (all features)", _centroid_advantage(tx, ty, vx, vy), sigma))
    return out


class HiddenRatingGame:
    def __init__(self, cfg: HiddenRatingConfig):
        self.cfg = cfg
        ladder = elo.RankLadder.load()
        if ladder.rank(cfg.low_rating) != ladder.rank(cfg.high_rating):
            raise ValueError("challenge ratings must share a rank")
        self.system = HElo(ProtocolConfig(label=cfg.label), ladder, cfg.seed, degree=cfg.degree)
        self.system.init()
        self.oracle = ChallengeOracle(ladder)
        self.rng = np.random.default_rng([cfg.seed, 0x41DE])

    def guard_checks(self) -> dict[str, bool]:
        lo, hi = self.cfg.low_rating, self.cfg.high_rating
        return {
            "guard_cross_rank_refused": not self.oracle.challenge("x-cross", lo, hi + 500.0),
            "honest_challenge_accepted": self.oracle.challenge("x-chal", lo, hi),
            "guard_corrupt_challenged_refused": not self.oracle.corrupt("x-chal"),
            "guard_challenge_corrupted_refused": self.oracle.corrupt("x-corr") and not self.oracle.challenge(
                "x-corr", lo, hi),
        }

    def challenged_view(self, user, rating: float) -> tuple[bytes, bytes, bytes]:
        """SP's view of registering with `rating`: commitment, ciphertext, proof."""
        rank = self.system.ladder.rank(rating)
        commitment, ct, proof, _ = user.prove_rating(rating, rank)
        return commitment, ct, proof

    def sample(self) -> tuple[np.ndarray, np.ndarray]:
        user = self.system.new_user("challenge")
        # Registration through SP once, so the view sampled below is exactly what SP accepts.
        if not self.system.register("challenge", self.cfg.low_rating, noise=0):
            raise ProtocolError("challenge registration refused")
        pair = (self.cfg.low_rating, self.cfg.high_rating)
        bits = self.rng.integers(0, 2, self.cfg.trials)
        feats = np.empty((self.cfg.trials, len(FEATURE_NAMES)))
        for t, b in enumerate(bits):
            feats[t] = view_features(*self.challenged_view(user, pair[int(b)]))
        return feats, bits

    def sp_cannot_decrypt(self) -> bool:
        """An SP that makes up its own secret key is refused, and forcing the key id yields noise."""
        own = S.keygen(self.system.params, self.rng)
        uid = next(iter(self.system.sp.records))
        ct = S.deserialize_ciphertext(self.system.params, self.system.sp.records[uid].ct)
        try:
            S.decrypt(own.sk, ct)
            return False
        except S.KeyMismatchError:
            pass
        forced = replace(own.sk, key_id=ct.key_id)
        try:
            value = float(S.decrypt(forced, ct)[0])
        except S.DecryptionError:
            return True
        return abs(value - self.system.users[uid].rating) > 1.0

    def scan(self) -> LeakScanner:
        cfg = SimConfig(users=self.cfg.scan_users, cycles=self.cfg.scan_cycles, seed=self.cfg.seed,
                        label=self.cfg.label, degree=self.cfg.degree)
        sim = Simulation(cfg)
        scanner = LeakScanner(sim.system, sim.skill)
        sim.run()
        scanner.scan_trace()
        return scanner

    def run(self) -> HiddenRatingReport:
        guards = self.guard_checks()
        feats, bits = self.sample()
        scanner = self.scan()
        return HiddenRatingReport(trials=self.cfg.trials, distinguishers=distinguish(feats, bits),
                               scan_messages=scanner.messages, scan_bytes=scanner.bytes, leaks=scanner.hits,
                               sp_decrypt_refused=self.sp_cannot_decrypt(), **guards)


def run_hidden_rating_game(cfg: HiddenRatingConfig | None = None) -> HiddenRatingReport:
    return HiddenRatingGame(cfg or HiddenRatingConfig()).run()
