"""The encrypted Elo update: expected scores by polynomial kernel, then R + K*(S - E).

The pieces are exposed separately so the service provider can fold in one
match at a time and finish the update after the last one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from helo import elo
from helo.ckks import scheme as S
from helo.ckks.poly import eval_poly, poly_depth
from helo.ckks.scheme import Ciphertext, SwitchKey

INV_DIVISOR = 1.0 / elo.ELO_DIVISOR  # 0.0025

Refresher = Callable[[Ciphertext], Ciphertext]


@dataclass(frozen=True)
class Kernel:
    coeffs: tuple[float, ...]
    interval: tuple[float, float] = elo.KERNEL_INTERVAL

    @classmethod
    def default(cls, degree: int = elo.KERNEL_DEGREE,
                interval: tuple[float, float] = elo.KERNEL_INTERVAL) -> "Kernel":
        return cls(tuple(float(c) for c in elo.chebyshev_coeffs(degree, interval)), interval)

    @property
    def depth(self) -> int:
        return poly_depth(self.coeffs)


def scaled(ct: Ciphertext) -> Ciphertext:
    """Rating / 400."""
    return S.eval_mul_const(ct, INV_DIVISOR)


def expected_term(own_scaled: Ciphertext, opp_scaled: Ciphertext, kernel: Kernel, rlk: SwitchKey) -> Ciphertext:
    """Encrypted expected score for one match, from both ratings already divided by 400."""
    gap = S.eval_sub(opp_scaled, own_scaled)
    return eval_poly(gap, kernel.coeffs, kernel.interval, rlk)


def finish(own: Ciphertext, expected_sum: Ciphertext, real_sum: float, k_factor: float,
           refresh: Refresher) -> Ciphertext:
    """own + K * refresh(S_real - sum E); the refreshed difference is the one multiplied by K."""
    diff = S.plain_sub(float(real_sum), expected_sum)
    fresh = refresh(diff)
    step = S.eval_mul_const(fresh, float(k_factor))
    return S.eval_add(own, step)


def update(own: Ciphertext, opponents: Sequence[Ciphertext], outcomes: Sequence[float], k_factor: float,
           kernel: Kernel, rlk: SwitchKey, refresh: Refresher) -> Ciphertext:
    """Batched update over n matches; opponents must already be under the player's key."""
    real = elo.check_outcomes(outcomes)
    if len(real) != len(opponents):
        raise elo.EloError(f"{len(opponents)} opponents but {len(real)} outcomes")
    own_scaled = scaled(own)
    total = None
    for opp in opponents:
        term = expected_term(own_scaled, scaled(opp), kernel, rlk)
        total = term if total is None else S.eval_add(total, term)
    return finish(own, total, sum(real), k_factor, refresh)
