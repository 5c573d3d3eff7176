"""Real-slot canonical embedding: slot j sits at the root zeta^(5^j mod 2d)."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


class EncodingError(ValueError):
    pass


@lru_cache(maxsize=None)
def _tables(degree: int):
    slots = degree // 2
    two_d = 2 * degree
    idx = np.empty(slots, dtype=np.int64)
    cidx = np.empty(slots, dtype=np.int64)
    g = 1
    for j in range(slots):
        idx[j] = (g - 1) // 2
        cidx[j] = (two_d - g - 1) // 2
        g = g * 5 % two_d
    twist = np.exp(1j * np.pi * np.arange(degree) / degree)
    return idx, cidx, twist


def embed_inverse(values, degree: int) -> np.ndarray:
    """Real polynomial coefficients whose canonical embedding carries `values` in its slots."""
    z = np.zeros(degree // 2, dtype=np.complex128)
    vals = np.asarray(values, dtype=np.complex128).ravel()
    if vals.size > degree // 2:
        raise EncodingError(f"{vals.size} values exceed {degree // 2} slots")
    if not np.all(np.isfinite(vals)):
        raise EncodingError("non-finite slot value")
    z[: vals.size] = vals
    idx, cidx, twist = _tables(degree)
    w = np.zeros(degree, dtype=np.complex128)
    w[idx] = z
    w[cidx] = np.conj(z)
    coeffs = np.fft.fft(w) / degree / twist
    return coeffs


def encode(values, scale: float, degree: int) -> list[int] | np.ndarray:
    """Scaled, rounded integer coefficients; int64 when they fit, else Python ints."""
    coeffs = embed_inverse(values, degree) * scale
    resid = np.max(np.abs(coeffs.imag)) if coeffs.size else 0.0
    if resid >= scale * 2.0 ** -30:
        raise EncodingError(f"imaginary residue {resid:.3e} too large for a real encoding")
    real = np.rint(coeffs.real)
    if np.max(np.abs(real)) < 2.0 ** 62:
        return real.astype(np.int64)
    return [int(x) for x in real]


def decode(coeffs, scale: float, degree: int) -> np.ndarray:
    """Slot values (real parts) from integer or float coefficients."""
    c = np.asarray([float(x) for x in coeffs], dtype=np.float64) if not isinstance(coeffs, np.ndarray) or coeffs.dtype == object else coeffs.astype(np.float64)
    idx, _, twist = _tables(degree)
    w = np.fft.ifft(c / scale * twist) * degree
    return w[idx].real
