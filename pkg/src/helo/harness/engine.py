"""Randomized checks of the homomorphic engine against plaintext arithmetic and a schoolbook ring product."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from helo import ring as R
from helo.ckks import scheme as S
from helo.ckks.params import params_for

OPS = ("add", "sub", "mulConst", "mul", "rescale")


@dataclass(frozen=True)
class EngineConfig:
    trials: int = 1000
    seed: int = 0
    label: str = "toy"
    degree: int | None = None
    slots: int = 8
    magnitude: float = 90.0
    ring_degrees: tuple[int, ...] = (16, 32, 64)
    ring_products: int = 20


@dataclass
class OpStats:
    trials: int = 0
    violations: int = 0
    worst_ratio: float = 0.0

    def record(self, err: float, bound: float) -> None:
        self.trials += 1
        ratio = err / bound if bound > 0 else float("inf")
        self.worst_ratio = max(self.worst_ratio, ratio)
        self.violations += ratio > 1.0


@dataclass
class EngineReport:
    ops: dict[str, OpStats] = field(default_factory=dict)
    ring_products: int = 0
    ring_mismatches: int = 0
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.ring_products > 0 and self.ring_mismatches == 0
                and all(s.trials > 0 and s.violations == 0 for s in self.ops.values()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def schoolbook_negacyclic(a: list[int], b: list[int], q: int) -> list[int]:
    """The O(d^2) product in Z_q[x]/(x^d + 1), straight from the definition."""
    d = len(a)
    out = [0] * d
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            k = i + j
            if k < d:
                out[k] += ai * bj
            else:
                out[k - d] -= ai * bj
    return [x % q for x in out]


def ring_product_check(degree: int, rng: np.random.Generator, limbs: int = 3) -> bool:
    params = R.RingParams.generate(degree, 45, 45, limbs - 1)
    Q = params.modulus()
    a = [int(x) for x in rng.integers(0, 2 ** 62, degree)]
    b = [int(x) for x in rng.integers(0, 2 ** 62, degree)]
    pa = R.ntt_forward(R.from_integers(params, a))
    pb = R.ntt_forward(R.from_integers(params, b))
    got = R.crt_reconstruct(R.ntt_inverse(R.ring_mul(pa, pb)), centered=False)
    return got == schoolbook_negacyclic([x % Q for x in a], [x % Q for x in b], Q)


class EngineTrials:
    def __init__(self, cfg: EngineConfig):
        self.cfg = cfg
        self.params = params_for(cfg.label, degree=cfg.degree)
        self.rng = np.random.default_rng([cfg.seed, 0xE9])
        self.keys = S.keygen(self.params, self.rng)

    def check(self, stats: OpStats, ct: S.Ciphertext, expected: np.ndarray) -> None:
        got = S.decrypt(self.keys.sk, ct)[: expected.size]
        stats.record(float(np.max(np.abs(got - expected))), ct.noise)

    def trial(self, report: EngineReport) -> None:
        n, m = self.cfg.slots, self.cfg.magnitude
        a = self.rng.uniform(-m, m, n)
        b = self.rng.uniform(-m, m, n)
        k = float(self.rng.uniform(-m, m))
        # Fresh encryptions carry the trial's magnitude as the public bound, which keeps the tracked noise tight.
        ca = S.encrypt(self.keys.pk, a, self.rng, bound=m)
        cb = S.encrypt(self.keys.pk, b, self.rng, bound=m)
        ops = report.ops
        self.check(ops["add"], S.eval_add(ca, cb), a + b)
        self.check(ops["sub"], S.eval_sub(ca, cb), a - b)
        self.check(ops["mulConst"], S.eval_mul_const(ca, k), k * a)
        raw = S.eval_mul(ca, cb, self.keys.rlk, rescale_result=False)
        self.check(ops["mul"], raw, a * b)
        self.check(ops["rescale"], S.rescale(raw), a * b)

    def run(self) -> EngineReport:
        start = time.perf_counter()
        report = EngineReport(ops={op: OpStats() for op in OPS})
        for _ in range(self.cfg.trials):
            self.trial(report)
        for degree in self.cfg.ring_degrees:
            for _ in range(self.cfg.ring_products):
                report.ring_products += 1
                report.ring_mismatches += not ring_product_check(degree, self.rng)
        report.seconds = time.perf_counter() - start
        return report


def run_engine_trials(cfg: EngineConfig | None = None) -> EngineReport:
    return EngineTrials(cfg or EngineConfig()).run()
