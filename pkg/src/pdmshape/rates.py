"""Capacities and bit-metric-decoding achievable rates by deterministic quadrature.

Everything is computed in bits (log2); dB enters only at I/O boundaries.
The channel is Y = X + Z with Z ~ N(0, noise_var); the receiver statistic
for level i is the posterior P(B_i | y) of the i-th label bit under the
transmit distribution, and the BMD rate is [H(X) - sum_i H(B_i|Y)]+.

Integrals over y use a composite Simpson rule on a fixed window that
extends ten noise deviations past the outermost points.  The step is
halved until two successive estimates agree within the requested
tolerance, which keeps results bit-reproducible across runs.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .constellation import induced_symbol_distribution
from .errors import BracketError, QuadratureError
from .util import bisect_root, entropy_bits

_CHUNK = 1 << 14


@dataclass(frozen=True)
class QuadratureSpec:
    """Window and convergence control for the rate integrals."""

    tol_bits: float = 1e-7
    tail_sigmas: float = 10.0
    initial_step: float = 0.25
    max_doublings: int = 12


DEFAULT_QUAD = QuadratureSpec()


@dataclass(frozen=True)
class RatePoint:
    """One evaluated point of a rate curve."""

    scheme: str
    snr_db: float
    rate: float
    params: str = ""


def awgn_capacity(snr):
    """Shannon capacity 0.5 log2(1 + SNR) of the real AWGN channel."""
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    return 0.5 * math.log2(1.0 + snr)


def _xlog2(v):
    out = np.zeros_like(v)
    np.log2(v, out=out, where=v > 0)
    return np.where(v > 0, v * out, 0.0)


def _adaptive_simpson(integrand, lo, hi, quad):
    """Integrate a vector-valued integrand(y)->(k, N) with step halving."""
    span = hi - lo
    n = max(int(math.ceil(span / quad.initial_step)), 8)
    n += n % 2
    prev = None
    for _ in range(quad.max_doublings + 1):
        y = np.linspace(lo, hi, n + 1)
        est = simpson(integrand(y), dx=span / n, axis=-1)
        if prev is not None and np.all(np.abs(est - prev) <= quad.tol_bits):
            return est
        prev = est
        n *= 2
    raise QuadratureError(
        f"no convergence to {quad.tol_bits} bits within "
        f"{quad.max_doublings} step halvings"
    )


def _chunked(fn, y):
    parts = [fn(y[i : i + _CHUNK]) for i in range(0, y.size, _CHUNK)]
    return np.concatenate(parts, axis=-1)


def _mixture(scaled_points, probs, y, noise_var):
    """Component densities P(x) * phi(y - x), shape (M, N)."""
    d = y[None, :] - scaled_points[:, None]
    return probs[:, None] * np.exp(-0.5 * d * d / noise_var) / math.sqrt(
        2.0 * math.pi * noise_var
    )


def _window(constellation, noise_var, quad):
    scaled = constellation.scaled_points
    sigma = math.sqrt(noise_var)
    return scaled, scaled[0] - quad.tail_sigmas * sigma, scaled[-1] + quad.tail_sigmas * sigma


def conditional_bit_entropies(
    symbol_probs, labeling, constellation, noise_var=1.0, quad=DEFAULT_QUAD
):
    """H(B_i | Y) for every label level i = 1..m, in bits."""
    probs = np.asarray(symbol_probs, dtype=float)
    scaled, lo, hi = _window(constellation, noise_var, quad)
    bits = labeling.table.astype(float).T  # (m, M)

    def integrand(y):
        def block(yb):
            w = _mixture(scaled, probs, yb, noise_var)
            p = w.sum(axis=0)
            s1 = bits @ w
            s0 = p[None, :] - s1
            return _xlog2(p)[None, :] - _xlog2(s0) - _xlog2(s1)

        return _chunked(block, y)

    return _adaptive_simpson(integrand, lo, hi, quad)


def bmd_rate(symbol_probs, labeling, constellation, noise_var=1.0, quad=DEFAULT_QUAD):
    """Bit-metric decoding rate [H(X) - sum_i H(B_i|Y)]+ in bits per channel use."""
    cond = conditional_bit_entropies(
        symbol_probs, labeling, constellation, noise_var, quad
    )
    return max(0.0, entropy_bits(symbol_probs) - float(cond.sum()))


def pdm_bmd_rate(
    dist, dm_labeling, fec_labeling, constellation, noise_var=1.0, quad=DEFAULT_QUAD
):
    """Product-input BMD rate [sum_i H(B_i^dm) - sum_i H(B_i^fec|Y)]+.

    The transmit distribution is induced through the matcher labeling;
    the receiver posteriors use the (generally different) FEC labeling.
    """
    probs = induced_symbol_distribution(dist, dm_labeling, constellation)
    cond = conditional_bit_entropies(
        probs, fec_labeling, constellation, noise_var, quad
    )
    return max(0.0, dist.entropy - float(cond.sum()))


def mutual_information(symbol_probs, constellation, noise_var=1.0, quad=DEFAULT_QUAD):
    """Symbol-wise mutual information I(X; Y) in bits."""
    probs = np.asarray(symbol_probs, dtype=float)
    scaled, lo, hi = _window(constellation, noise_var, quad)

    def integrand(y):
        def block(yb):
            w = _mixture(scaled, probs, yb, noise_var)
            p = w.sum(axis=0)
            cond = _xlog2(w).sum(axis=0) - _xlog2(p)  # -H(X|Y) density
            return cond[None, :]

        return _chunked(block, y)

    hxy = -float(_adaptive_simpson(integrand, lo, hi, quad)[0])
    return max(0.0, entropy_bits(probs) - hxy)


def bicm_capacity(labeling, constellation, noise_var=1.0, quad=DEFAULT_QUAD, symbol_probs=None):
    """Sum of per-level mutual informations sum_i I(B_i; Y).

    Defaults to the uniform input, the classical BICM capacity.  Computed
    from the KL form of each I(B_i; Y) rather than via H(X) - sum H(B_i|Y),
    so it can serve as an independent cross-check of the BMD rate.
    """
    M = constellation.size
    probs = (
        np.full(M, 1.0 / M)
        if symbol_probs is None
        else np.asarray(symbol_probs, dtype=float)
    )
    scaled, lo, hi = _window(constellation, noise_var, quad)
    bits = labeling.table.astype(float).T
    prior1 = bits @ probs
    prior0 = 1.0 - prior1

    def integrand(y):
        def block(yb):
            w = _mixture(scaled, probs, yb, noise_var)
            p = w.sum(axis=0)
            s1 = bits @ w
            s0 = p[None, :] - s1
            # sum_b S_b log2(S_b / (P(b) p(y))), using S_0 + S_1 = p
            val = _xlog2(s0) + _xlog2(s1) - _xlog2(p)[None, :]
            val -= s0 * np.log2(np.maximum(prior0, 1e-300))[:, None]
            val -= s1 * np.log2(np.maximum(prior1, 1e-300))[:, None]
            return val

        return _chunked(block, y)

    per_level = _adaptive_simpson(integrand, lo, hi, quad)
    return float(per_level.sum())


def bmd_metric(symbol_probs, labeling, constellation, noise_var=1.0):
    """Decoding metric q(x, y) = prod_i P(B_i = b_i(x) | y)."""
    probs = np.asarray(symbol_probs, dtype=float)
    scaled = constellation.scaled_points
    bits = labeling.table.astype(float).T

    def metric(x_points, y):
        w = _mixture(scaled, probs, y, noise_var)
        p = np.maximum(w.sum(axis=0), 1e-300)
        s1 = bits @ w
        post1 = s1 / p[None, :]
        out = np.ones((x_points.size, y.size))
        idx = np.searchsorted(scaled, x_points)
        for row, j in enumerate(idx):
            b = labeling.table[j].astype(float)[:, None]
            out[row] = np.prod(b * post1 + (1.0 - b) * (1.0 - post1), axis=0)
        return out

    return metric


def symbol_posterior_metric(symbol_probs, constellation, noise_var=1.0):
    """Symbol-wise metric q(x, y) = P(x | y)."""
    probs = np.asarray(symbol_probs, dtype=float)
    scaled = constellation.scaled_points

    def metric(x_points, y):
        w = _mixture(scaled, probs, y, noise_var)
        p = np.maximum(w.sum(axis=0), 1e-300)
        idx = np.searchsorted(scaled, x_points)
        return w[idx] / p[None, :]

    return metric


def gmi_rate(symbol_probs, metric, constellation, noise_var=1.0, quad=DEFAULT_QUAD):
    """Achievable rate [H(X) - E[-log2(q(X,Y)/sum_x q(x,Y))]]+ for a metric q."""
    probs = np.asarray(symbol_probs, dtype=float)
    scaled, lo, hi = _window(constellation, noise_var, quad)

    def integrand(y):
        def block(yb):
            w = _mixture(scaled, probs, yb, noise_var)
            q = np.asarray(metric(scaled, yb), dtype=float)
            ratio = q / np.maximum(q.sum(axis=0), 1e-300)[None, :]
            loss = -np.log2(np.maximum(ratio, 1e-300))
            return np.where(w > 0, w * loss, 0.0).sum(axis=0)[None, :]

        return _chunked(block, y)

    penalty = float(_adaptive_simpson(integrand, lo, hi, quad)[0])
    return max(0.0, entropy_bits(probs) - penalty)


def required_snr(rate_fn, target, lo_db=-10.0, hi_db=60.0, tol_bits=1e-5):
    """Invert a monotone rate-vs-SNR function by bisection in dB.

    rate_fn takes a linear SNR; the result is the SNR in dB at which the
    rate meets `target` within tol_bits.
    """
    def gap(db):
        return rate_fn(10.0 ** (db / 10.0)) - target

    glo, ghi = gap(lo_db), gap(hi_db)
    if glo > 0 or ghi < 0:
        raise BracketError(
            f"target {target} not bracketed on [{lo_db}, {hi_db}] dB "
            f"(rate deltas {glo:.4g}, {ghi:.4g})"
        )
    return bisect_root(gap, lo_db, hi_db, ftol=tol_bits, max_iter=100)
