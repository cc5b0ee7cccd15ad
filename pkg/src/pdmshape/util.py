"""Small shared helpers: entropies, dB conversion, bit packing, 1-D searches."""

import math

import numpy as np

from .errors import BracketError


def binary_entropy(p):
    """Entropy of a Bernoulli(p) source in bits; H(0) = H(1) = 0."""
    p = float(p)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def inverse_binary_entropy(h, tol=1e-14):
    """Solve H(p) = h for p in [0, 0.5] by bisection."""
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"entropy must be in [0, 1], got {h}")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def entropy_bits(probs):
    """Entropy in bits of a discrete distribution (zeros contribute zero)."""
    p = np.asarray(probs, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def bits_to_int(bits):
    """Interpret a 0/1 array as an unsigned integer, first bit most significant."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return 0
    pad = (-bits.size) % 8
    padded = np.concatenate([np.zeros(pad, dtype=np.uint8), bits])
    return int.from_bytes(np.packbits(padded).tobytes(), "big")


def int_to_bits(value, width):
    """Inverse of :func:`bits_to_int`: most-significant bit first."""
    if value < 0:
        raise ValueError("value must be nonnegative")
    if width == 0:
        if value != 0:
            raise ValueError("nonzero value with zero width")
        return np.zeros(0, dtype=np.uint8)
    nbytes = (width + 7) // 8
    raw = np.frombuffer(int(value).to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[-width:]


def golden_section_min(f, lo, hi, xtol=1e-6, max_iter=200):
    """Minimize a unimodal scalar function on [lo, hi].

    Returns (x, f(x)). Deterministic; evaluates f roughly
    log((hi-lo)/xtol) / log(golden ratio) times.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    if fc <= fd:
        return c, fc
    return d, fd


def bisect_root(f, lo, hi, xtol=0.0, ftol=0.0, max_iter=200):
    """Bisection for f(x) = 0 with f(lo), f(hi) of opposite sign.

    Stops when the interval is below xtol or |f| at the midpoint is
    below ftol; raises BracketError when the endpoints do not bracket.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(
            f"no sign change on [{lo}, {hi}]: f={flo:.6g}, {fhi:.6g}"
        )
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= ftol or (hi - lo) <= xtol:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return mid
