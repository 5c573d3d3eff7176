"""Homomorphic Chebyshev series evaluation.

The input is mapped affinely onto [-1, 1], a small power basis of
Chebyshev polynomials is built (baby steps T_1..T_7 plus giant steps
T_8, T_16, T_32, ...), and the series is split recursively by Chebyshev
division so the multiplicative depth grows with log2 of the degree rather
than with the degree itself.

Every sub-result is produced directly at a requested (level, scale) pair,
so additions inside the recursion never need a correcting multiplication.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from helo.ckks import scheme as S
from helo.ckks.scheme import Ciphertext, LevelError, SwitchKey

BABY = 8
NEGLIGIBLE = 2.0 ** -45


def _trim(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64).copy()
    c[np.abs(c) < NEGLIGIBLE] = 0.0
    nz = np.flatnonzero(c)
    return c[: nz[-1] + 1] if nz.size else c[:1]


def _divide(c: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Split sum c_k T_k as q * T_m + r with deg r < m (valid for deg < 2m)."""
    q = np.zeros(len(c) - m)
    r = c[:m].copy()
    q[0] = c[m]
    for k in range(m + 1, len(c)):
        q[k - m] += 2.0 * c[k]
        r[2 * m - k] -= c[k]
    return _trim(q), _trim(r)


def _giant(deg: int) -> int:
    return 1 << (deg.bit_length() - 1)


class _Plan:
    """Collects the T_k a series will touch."""

    def __init__(self, coeffs: np.ndarray):
        self.coeffs = coeffs
        self.needed: set[int] = set()
        self._collect(coeffs)

    def _collect(self, c: np.ndarray) -> None:
        deg = len(c) - 1
        if deg < BABY:
            self.needed.update(k for k in range(1, deg + 1) if c[k] != 0.0)
            return
        m = _giant(deg)
        self.needed.add(m)
        q, r = _divide(c, m)
        self._collect(q)
        self._collect(r)


def _depth_of_power(k: int) -> int:
    return max(0, math.ceil(math.log2(k))) if k > 1 else 0


def _leaf_headroom(c: np.ndarray, depth: dict[int, int]) -> int:
    used = [k for k in range(1, len(c)) if c[k] != 0.0]
    return max((depth[k] for k in used), default=0) + 1


def _headroom(c: np.ndarray, depth: dict[int, int]) -> int:
    """Levels consumed below the basis input to produce this sub-series."""
    deg = len(c) - 1
    if deg < BABY:
        return _leaf_headroom(c, depth)
    m = _giant(deg)
    q, r = _divide(c, m)
    return max(max(_headroom(q, depth), depth[m]) + 1, _headroom(r, depth))


def poly_depth(coeffs: Sequence[float]) -> int:
    """Levels evalPoly consumes, including the affine map onto [-1, 1]."""
    c = _trim(coeffs)
    if len(c) == 1:
        return 0
    plan = _Plan(c)
    depth = {k: _depth_of_power(k) for k in plan.needed | {1}}
    return 1 + _headroom(c, depth)


class _Basis:
    """Lazily built Chebyshev powers T_k(y) of one ciphertext."""

    def __init__(self, y: Ciphertext, rlk: SwitchKey):
        self.rlk = rlk
        self.t: dict[int, Ciphertext] = {1: y}

    def get(self, k: int) -> Ciphertext:
        if k in self.t:
            return self.t[k]
        a = _giant(k)
        if a == k:
            h = self.get(k // 2)
            sq = S.mul_int(S.eval_mul(h, h, self.rlk), 2)
            out = S.eval_sub(sq, 1.0)
        else:
            b = k - a
            prod = S.mul_int(S.eval_mul(self.get(a), self.get(b), self.rlk), 2)
            out = S.eval_sub(prod, self.get(a - b))
        # |T_k(y)| <= 1 on the promised input interval.
        out = replace(out, bound=1.0)
        self.t[k] = out
        return out


def _leaf(basis: _Basis, c: np.ndarray, level: int, scale: float) -> Ciphertext:
    """sum c_k T_k produced exactly at (level, scale) with a single rescale."""
    params = basis.t[1].params
    q = params.ring.moduli[level + 1]
    pre = scale * q
    acc = None
    used = [k for k in range(1, len(c)) if c[k] != 0.0] or [1]
    for k in used:
        tk = basis.get(k)
        if tk.level < level + 1:
            raise LevelError(f"T_{k} at level {tk.level} cannot feed an output at level {level}")
        tk = S.mod_drop(tk, level + 1)
        term = S.mul_int(tk, int(round(c[k] * pre / tk.scale)))
        # The integer multiplier is off by at most 1/2, i.e. 0.5 * s_k / pre in value units.
        term = replace(term, scale=pre, noise=abs(c[k]) * tk.noise + 0.5 * tk.bound * tk.scale / pre,
                       bound=abs(c[k]) * tk.bound)
        acc = term if acc is None else S.eval_add(acc, term)
    if c[0] != 0.0:
        acc = S.eval_add(acc, float(c[0]))
    out = S.rescale(acc)
    return replace(out, scale=float(scale))


def _eval(basis: _Basis, c: np.ndarray, level: int, scale: float) -> Ciphertext:
    deg = len(c) - 1
    if deg < BABY:
        return _leaf(basis, c, level, scale)
    m = _giant(deg)
    qpoly, rpoly = _divide(c, m)
    tm = basis.get(m)
    if tm.level < level + 1:
        raise LevelError(f"T_{m} at level {tm.level} cannot feed an output at level {level}")
    tm = S.mod_drop(tm, level + 1)
    q_mod = tm.params.ring.moduli[level + 1]
    q_ct = _eval(basis, qpoly, level + 1, scale * q_mod / tm.scale)
    prod = S.eval_mul(q_ct, tm, basis.rlk)
    prod = replace(prod, scale=float(scale))
    r_ct = _eval(basis, rpoly, level, scale)
    return S.eval_add(prod, r_ct)


def eval_poly(ct: Ciphertext, coeffs: Sequence[float], interval: tuple[float, float],
              rlk: SwitchKey) -> Ciphertext:
    """Encrypt-side sum_k coeffs[k] * T_k(y), y the affine image of ct's value in `interval`.

    The output lands on the nominal scale at the highest level the circuit
    allows.  Raises LevelError if `ct` has fewer than poly_depth(coeffs) levels.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("interval must satisfy a < b")
    c = _trim(coeffs)
    need = poly_depth(c)
    if ct.level < need:
        raise LevelError(f"evalPoly needs {need} levels, ciphertext has {ct.level}")
    params = ct.params
    if len(c) == 1:
        zero = S.mul_int(ct, 0)
        return replace(S.eval_add(zero, float(c[0])), bound=abs(c[0]))
    alpha = 2.0 / (hi - lo)
    beta = -(hi + lo) / (hi - lo)
    y = S.eval_mul_const(ct, alpha)
    if beta != 0.0:
        y = S.eval_add(y, beta)
    y = replace(y, bound=1.0)
    basis = _Basis(y, rlk)
    out_level = ct.level - need
    out = _eval(basis, c, out_level, params.scale)
    return replace(out, bound=float(np.sum(np.abs(c))))
