"""Heuristic noise-budget calculator.

Every bound is six standard deviations of the error's canonical-embedding
slot value, assuming independent coefficients: ternary secrets and
ephemeral keys have variance 2/3, rounding errors 1/12, Gaussian errors
sigma**2.  A slot of a product of two random polynomials with coefficient
variances v1, v2 has variance d*v1 * d*v2.  Values returned by the
`*_poly` helpers are in polynomial units (divide by the scale to get slot
units); the propagation helpers work in slot units.
"""
from __future__ import annotations

import math

from helo.ckks.params import CkksParams

TAIL = 6.0
TERNARY_VAR = 2.0 / 3.0
ROUND_VAR = 1.0 / 12.0


def encoding_poly(p: CkksParams) -> float:
    return TAIL * math.sqrt(p.degree * ROUND_VAR)


def fresh_poly(p: CkksParams) -> float:
    """Public-key encryption error v*e + e0 + e1*s plus encoding rounding."""
    d, s2 = p.degree, p.sigma ** 2
    var = d * TERNARY_VAR * d * s2 * 2 + d * s2 + d * ROUND_VAR
    return TAIL * math.sqrt(var)


def rounding_poly(p: CkksParams) -> float:
    """Divide-and-round error r0 + r1*s left by rescale or mod-down."""
    d = p.degree
    return TAIL * math.sqrt(d * ROUND_VAR + d * ROUND_VAR * d * TERNARY_VAR)


def keyswitch_poly(p: CkksParams, level: int) -> float:
    """Sum over centred RNS digits of digit*e_j, divided by the special prime, plus mod-down rounding."""
    d, s2 = p.degree, p.sigma ** 2
    digit_var = sum(q * q * ROUND_VAR for q in p.ring.moduli[: level + 1])
    special = p.ring.special_moduli[0]
    return TAIL * math.sqrt(d * digit_var * d * s2) / special + rounding_poly(p)


def fresh(p: CkksParams, scale: float | None = None) -> float:
    return fresh_poly(p) / (scale or p.scale)


def rescale(p: CkksParams, noise: float, new_scale: float) -> float:
    return noise + rounding_poly(p) / new_scale


def add(noise_a: float, noise_b: float) -> float:
    return noise_a + noise_b


def mul_const(p: CkksParams, noise: float, k: float, magnitude: float, new_scale: float, encoded_scale: float) -> float:
    """|k|*e plus the constant's rounding (half a unit at its encoding scale) plus rescale rounding."""
    return abs(k) * noise + magnitude * 0.5 / encoded_scale + rounding_poly(p) / new_scale


def mul(p: CkksParams, level: int, noise_a: float, mag_a: float, noise_b: float, mag_b: float,
        pre_scale: float, new_scale: float) -> float:
    """Tensor-product error, relinearization at `pre_scale` (= s_a * s_b), then rescale."""
    return (noise_a * mag_b + noise_b * mag_a + noise_a * noise_b
            + keyswitch_poly(p, level) / pre_scale + rounding_poly(p) / new_scale)


def precision_bits(noise: float, cap: float = 60.0) -> float:
    if noise <= 0:
        return cap
    return min(cap, -math.log2(noise))
