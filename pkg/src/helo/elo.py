"""Plaintext Elo arithmetic, rank ladders and the logistic kernel's Chebyshev series.

Everything here is exact floating-point reference code; encrypted results
are checked against it.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

RATING_MIN = 0.0
RATING_MAX = 4000.0
OUTCOMES = (0.0, 0.5, 1.0)
ELO_DIVISOR = 400.0
KERNEL_INTERVAL = (-5.0, 5.0)
KERNEL_DEGREE = 50


class EloError(ValueError):
    pass


def check_rating(r: float) -> float:
    r = float(r)
    if not RATING_MIN <= r <= RATING_MAX:
        raise EloError(f"rating {r} outside [{RATING_MIN:g}, {RATING_MAX:g}]")
    return r


def clamp(r: float) -> float:
    return min(RATING_MAX, max(RATING_MIN, r))


def logistic_kernel(x):
    """1 / (1 + 10**x), the expected score as a function of the scaled rating gap."""
    return 1.0 / (1.0 + np.power(10.0, x))


def expected_score(player: float, opponent: float) -> float:
    """Probability-like expected score of `player` against `opponent`.

    For a positive gap the value is taken as 1 - E(-gap), so
    expected_score(a, b) + expected_score(b, a) == 1 holds bit-exactly.
    """
    gap = (check_rating(opponent) - check_rating(player)) / ELO_DIVISOR
    if gap <= 0:
        return 1.0 / (1.0 + 10.0 ** gap)
    return 1.0 - 1.0 / (1.0 + 10.0 ** (-gap))


@dataclass(frozen=True)
class EloConfig:
    k_factor: float = 32.0
    matches: int = 3

    def __post_init__(self):
        if not self.k_factor > 0:
            raise EloError("K must be positive")
        if int(self.matches) != self.matches or self.matches < 3:
            raise EloError("at least three matches per update are required")


def check_outcomes(outcomes: Sequence[float]) -> list[float]:
    out = [float(s) for s in outcomes]
    bad = [s for s in out if s not in OUTCOMES]
    if bad:
        raise EloError(f"match outcomes must be 0, 0.5 or 1, got {bad}")
    return out


def rating_delta(rating: float, opponents: Sequence[float], outcomes: Sequence[float], k: float) -> float:
    """K * (sum of outcomes - sum of expected scores), unclamped."""
    if len(opponents) != len(outcomes):
        raise EloError(f"{len(opponents)} opponents but {len(outcomes)} outcomes")
    real = check_outcomes(outcomes)
    exp = [expected_score(rating, o) for o in opponents]
    return k * math.fsum(real + [-e for e in exp])


def update_rating(rating: float, opponents: Sequence[float], outcomes: Sequence[float],
                  cfg: EloConfig = EloConfig()) -> float:
    """New rating after one batch of cfg.matches results, clamped to the admissible range."""
    if len(opponents) != cfg.matches or len(outcomes) != cfg.matches:
        raise EloError(f"expected {cfg.matches} opponents and outcomes, got {len(opponents)} and {len(outcomes)}")
    return clamp(check_rating(rating) + rating_delta(rating, opponents, outcomes, cfg.k_factor))


# ---------------------------------------------------------------------------
# rank ladder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Band:
    label: str
    low: int
    high: int

    def contains(self, r: float) -> bool:
        return self.low <= r < self.high or r == self.high == RATING_MAX

    @property
    def proof_high(self) -> int:
        """Exclusive upper bound for range proofs; the top band must admit the rating cap itself."""
        return int(self.high) + 1 if self.high == RATING_MAX else int(self.high)


class LadderError(EloError):
    pass


@dataclass(frozen=True)
class RankLadder:
    """Half-open bands tiling [0, 4000); a rating of exactly 4000 falls in the top band."""

    bands: tuple[Band, ...]

    def __post_init__(self):
        if not self.bands:
            raise LadderError("ladder has no bands")
        if self.bands[0].low != RATING_MIN or self.bands[-1].high != RATING_MAX:
            raise LadderError("ladder must span [0, 4000)")
        labels = set()
        for prev, nxt in zip(self.bands, self.bands[1:]):
            if prev.high != nxt.low:
                raise LadderError(f"gap or overlap between {prev.label} and {nxt.label}")
        for b in self.bands:
            if b.low >= b.high:
                raise LadderError(f"empty band {b.label}")
            if b.label in labels:
                raise LadderError(f"duplicate label {b.label}")
            labels.add(b.label)

    @classmethod
    def uniform(cls, width: int = 500) -> "RankLadder":
        if RATING_MAX % width:
            raise LadderError("width must divide 4000")
        return cls(tuple(Band(f"{lo}-{lo + width}", lo, lo + width) for lo in range(0, int(RATING_MAX), width)))

    @classmethod
    def from_json(cls, text: str) -> "RankLadder":
        try:
            doc = json.loads(text)
            bands = tuple(Band(str(b["label"]), int(b["min"]), int(b["max"])) for b in doc["bands"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise LadderError(f"malformed ladder file: {exc}") from exc
        return cls(bands)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RankLadder":
        if path is None:
            return cls.from_json(resources.files("helo").joinpath("data/ladder.json").read_text())
        try:
            return cls.from_json(Path(path).read_text())
        except OSError as exc:
            raise LadderError(f"cannot read ladder file: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps({"bands": [{"label": b.label, "min": b.low, "max": b.high} for b in self.bands]}, indent=2)

    def band(self, r: float) -> Band:
        r = check_rating(r)
        if r == RATING_MAX:
            return self.bands[-1]
        return self.bands[bisect_right([b.low for b in self.bands], r) - 1]

    def rank(self, r: float) -> str:
        return self.band(r).label

    def by_label(self, label: str) -> Band:
        for b in self.bands:
            if b.label == label:
                return b
        raise LadderError(f"unknown rank {label!r}")

    def labels(self) -> list[str]:
        return [b.label for b in self.bands]


def rank(r: float, ladder: RankLadder) -> str:
    return ladder.rank(r)


# ---------------------------------------------------------------------------
# Chebyshev series of the kernel
# ---------------------------------------------------------------------------

def chebyshev_coeffs(degree: int = KERNEL_DEGREE, interval: tuple[float, float] = KERNEL_INTERVAL,
                     fn=logistic_kernel) -> np.ndarray:
    """Interpolation coefficients at Chebyshev points, in the variable mapped onto [-1, 1]."""
    lo, hi = interval
    if degree < 1:
        raise EloError("degree must be at least 1")
    if not lo < hi:
        raise EloError("interval must satisfy a < b")
    return C.Chebyshev.interpolate(fn, degree, domain=[lo, hi]).coef


def chebyshev_eval(coeffs, x, interval: tuple[float, float] = KERNEL_INTERVAL):
    """Clenshaw evaluation of the series at points x of the original interval."""
    lo, hi = interval
    y = (2.0 * np.asarray(x, dtype=np.float64) - (lo + hi)) / (hi - lo)
    return C.chebval(y, coeffs)


def max_grid_error(coeffs, interval: tuple[float, float] = KERNEL_INTERVAL, points: int = 10_001,
                   fn=logistic_kernel) -> float:
    xs = np.linspace(interval[0], interval[1], points)
    return float(np.max(np.abs(chebyshev_eval(coeffs, xs, interval) - fn(xs))))


def coeffs_json(coeffs, interval: tuple[float, float] = KERNEL_INTERVAL) -> str:
    return json.dumps({"interval": list(interval), "degree": len(coeffs) - 1,
                       "coefficients": [float(c) for c in coeffs]}, indent=2)
