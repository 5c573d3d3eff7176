"""Encrypted update chain against the plaintext oracle, one update at a time."""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from helo import circuit, elo
from helo.ckks import scheme as S
from helo.ckks.params import params_for

# Published reference figures at 128-bit security, printed next to ours for comparison only.
REFERENCE_MEAN_DIFF = 5.569e-4
REFERENCE_MAX_DIFF = 34.92e-4

MEAN_LIMIT = 1e-3
MAX_LIMIT = 1e-2
PRECISION_FLOOR_BITS = 20.0
PRECISION_SHARE = 0.95


@dataclass(frozen=True)
class ExperimentConfig:
    label: str = "toy"
    updates: int = 1000
    opponents: int = 3
    opponent_sigma: float = 100.0
    start_rating: float = 2000.0
    seed: int = 0
    k_factor: float = 32.0
    degree: int | None = None
    params_path: str | None = None
    symmetric: bool = False

    def __post_init__(self):
        if self.updates < 1:
            raise ValueError("updates must be >= 1")
        elo.EloConfig(self.k_factor, self.opponents)


@dataclass
class AccuracyReport:
    config: dict
    mean_diff: float
    std_dev: float
    min_diff: float
    max_diff: float
    precision_bits: list[float] = field(default_factory=list)
    noise_bound_bits: list[float] = field(default_factory=list)
    diffs: list[float] = field(default_factory=list)
    seconds: float = 0.0
    reference_mean_diff: float = REFERENCE_MEAN_DIFF
    reference_max_diff: float = REFERENCE_MAX_DIFF

    @property
    def precision_share(self) -> float:
        """Fraction of updates at or above the precision floor."""
        return sum(b >= PRECISION_FLOOR_BITS for b in self.precision_bits) / len(self.precision_bits)

    @property
    def passed(self) -> bool:
        return (self.mean_diff <= MEAN_LIMIT and self.max_diff <= MAX_LIMIT
                and self.precision_share >= PRECISION_SHARE)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precision_share"] = self.precision_share
        d["passed"] = self.passed
        return d

    def rows(self) -> list[dict]:
        return [{"update": i, "diff": d, "precision_bits": p, "noise_bound_bits": b}
                for i, (d, p, b) in enumerate(zip(self.diffs, self.precision_bits, self.noise_bound_bits))]


def draw_match(rating: float, cfg: ExperimentConfig, rng: np.random.Generator) -> tuple[list[float], list[float]]:
    """Opponents from N(rating, sigma) clamped to the rating range; outcomes uniform over {0, 0.5, 1}."""
    if cfg.symmetric:
        if cfg.opponents != 3:
            raise ValueError("the symmetric pattern needs exactly three opponents")
        return [rating - 100.0, rating, rating + 100.0], [1.0, 0.5, 0.0]
    opps = [elo.clamp(float(x)) for x in rng.normal(rating, cfg.opponent_sigma, cfg.opponents)]
    outs = [float(x) for x in rng.choice(elo.OUTCOMES, cfg.opponents)]
    return opps, outs


def run_accuracy(cfg: ExperimentConfig, progress=None) -> AccuracyReport:
    """Each update encrypts the current rating afresh, as a user does after verification.

    The chain follows the decrypted encrypted result; every update is scored
    against the oracle applied to the same input, so errors do not compound
    through the comparison.
    """
    params = params_for(cfg.label, cfg.params_path, cfg.degree)
    rng = np.random.default_rng([cfg.seed, 0xACC])
    keys = S.keygen(params, rng)
    kernel = circuit.Kernel.default()
    elo_cfg = elo.EloConfig(cfg.k_factor, cfg.opponents)

    def refresh(ct):
        return S.refresh(ct, keys, rng)

    rating = cfg.start_rating
    diffs, bits, bound_bits = [], [], []
    t0 = time.perf_counter()
    for step in range(cfg.updates):
        opps, outs = draw_match(rating, cfg, rng)
        own = S.encrypt(keys.pk, [rating], rng)
        opp_cts = [S.encrypt(keys.pk, [o], rng) for o in opps]
        out = circuit.update(own, opp_cts, outs, cfg.k_factor, kernel, keys.rlk, refresh)
        got = float(S.decrypt(keys.sk, out)[0])
        want = elo.update_rating(rating, opps, outs, elo_cfg)
        diffs.append(abs(got - want))
        bits.append(S.estimate_precision([got], [want]))
        bound_bits.append(-math.log2(out.noise) if out.noise > 0 else 60.0)
        rating = elo.clamp(got)
        if progress is not None:
            progress(step + 1, cfg.updates)
    seconds = time.perf_counter() - t0
    return AccuracyReport(
        config=asdict(cfg),
        mean_diff=statistics.fmean(diffs),
        std_dev=statistics.pstdev(diffs),
        min_diff=min(diffs),
        max_diff=max(diffs),
        precision_bits=bits,
        noise_bound_bits=bound_bits,
        diffs=diffs,
        seconds=seconds,
    )
