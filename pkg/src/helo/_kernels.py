"""Numba kernels for word-sized modular arithmetic on (limbs, degree) int64 arrays.

All moduli are < 2**50.  Products are reduced with a float64 quotient
estimate followed by an exact wrapping int64 correction, which is off by
at most one multiple of q before the final fix-up.
"""
import numba as nb
import numpy as np

MAX_MODULUS_BITS = 50


@nb.njit(cache=True, inline="always")
def _mulmod(a, b, q, qinv):
    quot = np.int64(float(a) * float(b) * qinv)
    r = a * b - quot * q
    r += (r >> 63) & q
    r -= q
    r += (r >> 63) & q
    return r


@nb.njit(cache=True, inline="always")
def _mulmod_pre(a, w, wq, q):
    # wq = w / q precomputed
    quot = np.int64(float(a) * wq)
    r = a * w - quot * q
    r += (r >> 63) & q
    r -= q
    r += (r >> 63) & q
    return r


@nb.njit(cache=True)
def ntt_forward(a, qs, psi, psi_f):
    """In-place negacyclic NTT, natural order in, bit-reversed order out."""
    limbs, n = a.shape
    for l in range(limbs):
        q = qs[l]
        row = a[l]
        tw = psi[l]
        twf = psi_f[l]
        t = n
        m = 1
        while m < n:
            t >>= 1
            for i in range(m):
                j1 = 2 * i * t
                w = tw[m + i]
                wq = twf[m + i]
                for j in range(j1, j1 + t):
                    u = row[j]
                    v = _mulmod_pre(row[j + t], w, wq, q)
                    s = u + v - q
                    s += (s >> 63) & q
                    d = u - v
                    d += (d >> 63) & q
                    row[j] = s
                    row[j + t] = d
            m <<= 1


@nb.njit(cache=True)
def ntt_inverse(a, qs, ipsi, ipsi_f, ninv, ninv_f):
    """In-place inverse of ntt_forward."""
    limbs, n = a.shape
    for l in range(limbs):
        q = qs[l]
        row = a[l]
        tw = ipsi[l]
        twf = ipsi_f[l]
        t = 1
        m = n
        while m > 1:
            h = m >> 1
            j1 = 0
            for i in range(h):
                w = tw[h + i]
                wq = twf[h + i]
                for j in range(j1, j1 + t):
                    u = row[j]
                    v = row[j + t]
                    s = u + v - q
                    s += (s >> 63) & q
                    d = u - v
                    d += (d >> 63) & q
                    row[j] = s
                    row[j + t] = _mulmod_pre(d, w, wq, q)
                j1 += 2 * t
            t <<= 1
            m = h
        ni = ninv[l]
        nif = ninv_f[l]
        for j in range(n):
            row[j] = _mulmod_pre(row[j], ni, nif, q)


@nb.njit(cache=True)
def mul(a, b, qs, qinvs):
    limbs, n = a.shape
    out = np.empty_like(a)
    for l in range(limbs):
        q = qs[l]
        qi = qinvs[l]
        for j in range(n):
            out[l, j] = _mulmod(a[l, j], b[l, j], q, qi)
    return out


@nb.njit(cache=True)
def mul_acc(acc, a, b, qs, qinvs):
    """acc += a * b (mod q), in place."""
    limbs, n = a.shape
    for l in range(limbs):
        q = qs[l]
        qi = qinvs[l]
        for j in range(n):
            s = acc[l, j] + _mulmod(a[l, j], b[l, j], q, qi) - q
            s += (s >> 63) & q
            acc[l, j] = s


@nb.njit(cache=True)
def mul_scalar(a, k, qs, qinvs):
    """Multiply limb l by the scalar k[l] (already reduced mod q_l)."""
    limbs, n = a.shape
    out = np.empty_like(a)
    for l in range(limbs):
        q = qs[l]
        w = k[l]
        wq = float(w) * qinvs[l]
        for j in range(n):
            out[l, j] = _mulmod_pre(a[l, j], w, wq, q)
    return out


@nb.njit(cache=True)
def add(a, b, qs):
    limbs, n = a.shape
    out = np.empty_like(a)
    for l in range(limbs):
        q = qs[l]
        for j in range(n):
            s = a[l, j] + b[l, j] - q
            s += (s >> 63) & q
            out[l, j] = s
    return out


@nb.njit(cache=True)
def sub(a, b, qs):
    limbs, n = a.shape
    out = np.empty_like(a)
    for l in range(limbs):
        q = qs[l]
        for j in range(n):
            d = a[l, j] - b[l, j]
            d += (d >> 63) & q
            out[l, j] = d
    return out


@nb.njit(cache=True)
def neg(a, qs):
    limbs, n = a.shape
    out = np.empty_like(a)
    for l in range(limbs):
        q = qs[l]
        for j in range(n):
            x = a[l, j]
            out[l, j] = 0 if x == 0 else q - x
    return out


@nb.njit(cache=True)
def lift_centered(src, q_src, qs):
    """Reduce a centered lift of src (values mod q_src) into every modulus in qs."""
    n = src.shape[0]
    limbs = qs.shape[0]
    out = np.empty((limbs, n), dtype=np.int64)
    half = q_src >> 1
    for j in range(n):
        x = src[j]
        if x > half:
            x -= q_src
        for l in range(limbs):
            q = qs[l]
            r = x % q
            out[l, j] = r
    return out


@nb.njit(cache=True)
def sub_scale(a, t, qs, inv, inv_f):
    """(a - t) * inv per limb; the divide-and-round step of rescale and mod-down."""
    limbs, n = a.shape
    out = np.empty_like(a)
    for l in range(limbs):
        q = qs[l]
        w = inv[l]
        wq = inv_f[l]
        for j in range(n):
            d = a[l, j] - t[l, j]
            d += (d >> 63) & q
            out[l, j] = _mulmod_pre(d, w, wq, q)
    return out
