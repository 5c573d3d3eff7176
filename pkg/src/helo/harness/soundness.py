"""Range-proof battery: completeness, the upper boundary, and forged or mutated proofs."""
from __future__ import annotations

import hashlib
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from helo import elo, zkrp
from helo import primitives as P


@dataclass(frozen=True)
class SoundnessConfig:
    honest: int = 1000
    adversarial: int = 1200
    seed: int = 0


@dataclass
class SoundnessReport:
    honest: int = 0
    accepted_honest: int = 0
    boundary_refused_by_prover: bool = False
    boundary_rejected: bool = False
    adversarial: dict[str, int] = field(default_factory=dict)
    adversarial_accepted: int = 0
    plaintext_lies: int = 0
    plaintext_lies_rejected: int = 0
    size_elements: int = 0
    size_predicted: int = 0
    size_bytes: int = 0
    seconds: float = 0.0

    @property
    def adversarial_total(self) -> int:
        return sum(self.adversarial.values())

    @property
    def size_ok(self) -> bool:
        return abs(self.size_elements - self.size_predicted) <= 1

    @property
    def passed(self) -> bool:
        return (self.accepted_honest == self.honest and self.boundary_refused_by_prover and self.boundary_rejected
                and self.adversarial_accepted == 0 and self.size_ok
                and self.plaintext_lies_rejected == self.plaintext_lies)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(adversarial_total=self.adversarial_total, size_ok=self.size_ok, passed=self.passed)
        return d


def _stub_encryptor(value: float, seed: int) -> bytes:
    # Stands in for CKKS here: verification never encrypts, only the statement bytes matter.
    return hashlib.sha256(repr((float(value), int(seed))).encode()).digest() * 4


class RangeBattery:
    def __init__(self, cfg: SoundnessConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng([cfg.seed, 0x5EED])
        self.pp = P.CommitParams.setup()
        self.key, _ = zkrp.setup("rccc")
        self.ladder = elo.RankLadder.load()

    def instance(self, value: float | None = None, band: elo.Band | None = None):
        """A fresh honest statement, witness and proof for a rating inside a ladder band."""
        if band is None:
            band = self.ladder.bands[int(self.rng.integers(len(self.ladder.bands)))]
        low, high = int(band.low), int(band.high)
        if value is None:
            value = float(self.rng.uniform(low, high))
        v = math.floor(value)
        blind = P.random_scalar(self.rng)
        seed = int(self.rng.integers(2 ** 63))
        stmt = zkrp.RangeStatement(self.pp, P.commit(self.pp, v, blind), low, high, b"pk",
                                   _stub_encryptor(value, seed))
        w = zkrp.Witness(v, blind, seed, value)
        return stmt, w, zkrp.prove(self.key, stmt, w, _stub_encryptor, self.rng)

    def completeness(self, report: SoundnessReport) -> None:
        for k in range(self.cfg.honest):
            # Both ends of a band are exercised explicitly on top of the random draws.
            band = self.ladder.bands[k % len(self.ladder.bands)]
            value = {0: band.low, 1: band.high - 0.5}.get(k % 7)
            stmt, _, proof = self.instance(value, band)
            report.honest += 1
            report.accepted_honest += zkrp.verify(self.key, stmt, zkrp.serialize_proof(proof))

    def boundary(self, report: SoundnessReport) -> None:
        band = self.ladder.bands[2]
        low, high = int(band.low), int(band.high)
        blind = P.random_scalar(self.rng)
        stmt = zkrp.RangeStatement(self.pp, P.commit(self.pp, high, blind), low, high)
        w = zkrp.Witness(high, blind)
        try:
            zkrp.prove(self.key, stmt, w, rng=self.rng)
        except zkrp.ProofError:
            report.boundary_refused_by_prover = True
        forced = zkrp.prove(self.key, stmt, w, rng=self.rng, check=False)
        report.boundary_rejected = not zkrp.verify(self.key, stmt, forced)

    # -- adversarial trials ------------------------------------------------------------

    def rebind(self, stmt: zkrp.RangeStatement, which: int) -> zkrp.RangeStatement:
        """The same proof presented against a statement differing in one component."""
        other = P.commit(self.pp, int(self.rng.integers(stmt.low, stmt.high)), P.random_scalar(self.rng))
        choices = (
            dict(commitment=other),
            dict(low=stmt.low + 1, high=stmt.high + 1),
            dict(high=stmt.high * 2),
            dict(ciphertext=bytes([stmt.ciphertext[0] ^ 1]) + stmt.ciphertext[1:]),
            dict(public_key=b"another pk"),
        )
        return zkrp.RangeStatement(**{**stmt.__dict__, **choices[which % len(choices)]})

    def forge(self, which: int):
        """A prover that ignores the relation: above or below the band, a wrong blind, or a value
        exactly 2^n away so its masked bit decomposition looks in range."""
        band = self.ladder.bands[1 + which % (len(self.ladder.bands) - 2)]
        low, high = int(band.low), int(band.high)
        blind = P.random_scalar(self.rng)
        kind = which % 4
        inside = int(self.rng.integers(low, high))
        v = (high + int(self.rng.integers(0, 200)), low - 1 - int(self.rng.integers(0, 200)),
             inside, inside + (1 << zkrp.bit_count(low, high)))[kind]
        stmt = zkrp.RangeStatement(self.pp, P.commit(self.pp, v, blind), low, high, b"pk",
                                   _stub_encryptor(v + 0.25, 7))
        w = zkrp.Witness(v, blind if kind != 2 else blind + 1, 7, v + 0.25)
        return stmt, zkrp.prove(self.key, stmt, w, _stub_encryptor, self.rng, check=False)

    def plaintext_lies(self, report: SoundnessReport, trials: int = 100) -> None:
        """In-range commitments whose ciphertext holds another value.

        The public verifier cannot see this; the designated check with the opening must.
        """
        rejected = 0
        for _ in range(trials):
            stmt, w, _ = self.instance()
            lie = zkrp.Witness(w.value, w.blind, w.enc_seed, w.plaintext + 600.0)
            forged = zkrp.prove(self.key, stmt, lie, _stub_encryptor, self.rng, check=False)
            rejected += not zkrp.verify_binding(self.key, stmt, forged, lie, _stub_encryptor)
        report.plaintext_lies = trials
        report.plaintext_lies_rejected = rejected

    def adversarial(self, report: SoundnessReport) -> None:
        per = self.cfg.adversarial // 3
        counts = {"statement binding": 0, "mutation": 0, "forged witness": 0}
        accepted = 0
        pool = [self.instance() for _ in range(8)]
        for t in range(per):
            stmt, _, proof = pool[t % len(pool)]
            accepted += zkrp.verify(self.key, self.rebind(stmt, t), proof)
            counts["statement binding"] += 1
        for t in range(per):
            stmt, _, proof = pool[t % len(pool)]
            blob = bytearray(zkrp.serialize_proof(proof))
            pos = int(self.rng.integers(len(blob)))
            blob[pos] ^= 1 << int(self.rng.integers(8))
            accepted += zkrp.verify(self.key, stmt, bytes(blob))
            counts["mutation"] += 1
        for t in range(self.cfg.adversarial - 2 * per):
            stmt, proof = self.forge(t)
            accepted += zkrp.verify(self.key, stmt, proof)
            counts["forged witness"] += 1
        report.adversarial = counts
        report.adversarial_accepted = int(accepted)
        stmt, _, proof = pool[0]
        report.size_elements = proof.element_count
        report.size_predicted = zkrp.predicted_elements(stmt.low, stmt.high)
        report.size_bytes = len(zkrp.serialize_proof(proof))

    def run(self) -> SoundnessReport:
        start = time.perf_counter()
        report = SoundnessReport()
        self.completeness(report)
        self.boundary(report)
        self.adversarial(report)
        self.plaintext_lies(report)
        report.seconds = time.perf_counter() - start
        return report


def run_range_battery(cfg: SoundnessConfig | None = None) -> SoundnessReport:
    return RangeBattery(cfg or SoundnessConfig()).run()
