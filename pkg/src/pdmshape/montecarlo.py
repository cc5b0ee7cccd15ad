"""Stochastic validation harness: sampling, posteriors, and end-to-end runs.

Randomness comes from a counter-based generator (Philox 4x64-10) keyed by
(seed, substream), so a (seed, substream, draw-index) triple always maps
to the same variate no matter how work is split across workers.  Normals
are drawn by inverse CDF on 53-bit uniforms shifted to the open interval,
never by rejection, so the draw count per sample is fixed.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import pas
from .allocation import ParallelChannelSet, bit_load, waterfill
from .constellation import (
    BRGC,
    NBBC,
    ProductInputDistribution,
    induced_symbol_distribution,
    make_ask,
    make_labeling,
)
from .errors import ConfigurationError
from .optimizer import min_weighted_energy_parallel
from .pdm import build_parallel_pdm, pdm_decode, pdm_encode
from .util import entropy_bits

_LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class RandomStream:
    """Reproducible stream handle: a 64-bit seed plus a substream index."""

    seed: int
    stream_index: int = 0

    def substream(self, index):
        return RandomStream(seed=self.seed, stream_index=index)

    def generator(self):
        """Fresh Philox generator for this (seed, substream) pair."""
        return np.random.Generator(
            np.random.Philox(key=[self.seed & (2**64 - 1), self.stream_index])
        )


def uniforms_open(gen, n):
    """Uniforms in the open interval (0, 1) from 53-bit draws."""
    k = gen.integers(0, 1 << 53, size=n, dtype=np.uint64)
    return (k.astype(float) + 0.5) / float(1 << 53)


def standard_normals(gen, n):
    """Inverse-CDF Gaussian draws; reproducible across platforms."""
    return ndtri(uniforms_open(gen, n))


def sample_symbols(symbol_probs, constellation, n, gen):
    """Draw symbol indices from a constellation distribution by inverse CDF."""
    cdf = np.cumsum(np.asarray(symbol_probs, dtype=float))
    u = uniforms_open(gen, n)
    return np.minimum(np.searchsorted(cdf, u), constellation.size - 1)


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error."""

    value: float
    std_error: float
    count: int


def _estimate(samples):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    return McEstimate(
        value=float(samples.mean()),
        std_error=float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf"),
        count=n,
    )


def transmit(symbols, gains, gen, noise_var=1.0):
    """Channel pass y = h x + z with z ~ N(0, noise_var)."""
    symbols = np.asarray(symbols, dtype=float)
    gains = np.broadcast_to(np.asarray(gains, dtype=float), symbols.shape)
    if noise_var == 0.0:
        return gains * symbols
    return gains * symbols + math.sqrt(noise_var) * standard_normals(gen, symbols.size)


def bit_log2_posteriors(y, constellation, labeling, symbol_probs, noise_var=1.0):
    """log2 P(B_i = b | y) for every level i and bit value b.

    Returns an array of shape (m, 2, len(y)).  All math happens in the
    log domain with max subtraction, so extreme SNRs do not underflow.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    probs = np.asarray(symbol_probs, dtype=float)
    scaled = constellation.scaled_points
    nv = max(noise_var, 1e-12)  # noiseless limit: point mass on the nearest point
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(np.maximum(probs, 1e-300)), -np.inf)
    d = y[None, :] - scaled[:, None]
    logw = logp[:, None] - 0.5 * d * d / nv  # (M, N), shared constants drop
    peak = logw.max(axis=0, keepdims=True)
    w = np.exp(logw - peak)
    total = w.sum(axis=0)
    m = constellation.m
    out = np.empty((m, 2, y.size))
    for i in range(m):
        bits = labeling.table[:, i].astype(bool)
        s1 = w[bits].sum(axis=0)
        s0 = total - s1
        with np.errstate(divide="ignore"):
            out[i, 0] = (np.log(np.maximum(s0, 1e-300)) - np.log(total)) * _LOG2E
            out[i, 1] = (np.log(np.maximum(s1, 1e-300)) - np.log(total)) * _LOG2E
    return out


def bit_posteriors(y, constellation, labeling, symbol_probs, noise_var=1.0):
    """P(B_i = b | y), shape (m, 2, len(y)); each level sums to one."""
    log2p = bit_log2_posteriors(y, constellation, labeling, symbol_probs, noise_var)
    p = np.exp2(log2p)
    return p / p.sum(axis=1, keepdims=True)


def estimate_bmd_terms(
    symbol_probs, labeling, constellation, samples, stream, noise_var=1.0
):
    """Monte Carlo estimates of H(B_i | Y) per level via -log2 posterior scores."""
    if samples < 2:
        raise ConfigurationError("need at least two samples")
    gen = stream.generator()
    idx = sample_symbols(symbol_probs, constellation, samples, gen)
    x = constellation.scaled_points[idx]
    y = transmit(x, 1.0, gen, noise_var)
    log2post = bit_log2_posteriors(y, constellation, labeling, symbol_probs, noise_var)
    sent_bits = labeling.table[idx]  # (N, m)
    cols = np.arange(samples)
    return [
        _estimate(-log2post[i, sent_bits[:, i], cols])
        for i in range(constellation.m)
    ]


@dataclass(frozen=True)
class RunScenario:
    """Everything an end-to-end frame needs, fixed up front."""

    pdm_config: object
    gamma: float
    gains: np.ndarray  # per channel, plan order
    deltas: np.ndarray  # per channel, plan order
    target_powers: np.ndarray  # per channel, plan order
    parity_seed: int = 0
    noise_var: float = 1.0

    @property
    def data_sign_count(self):
        count = self.gamma * self.pdm_config.num_channels
        rounded = round(count)
        if abs(count - rounded) > 1e-9:
            raise ConfigurationError(
                f"gamma * L = {count} is not an integer sign count"
            )
        return int(rounded)

    @property
    def bits_per_frame(self):
        return self.pdm_config.total_input_bits + self.data_sign_count


@dataclass(frozen=True)
class GroupReport:
    """Per constellation-group statistics of an end-to-end run."""

    m: int
    gain: float
    channels: int
    target_power: float
    empirical_power: McEstimate
    conditional_entropy_estimates: tuple
    input_entropy: float


@dataclass(frozen=True)
class RunReport:
    frames: int
    dm_rate: float
    roundtrip_failures: int
    groups: tuple


def _frame_stats(scenario, frame_index, stream):
    """Simulate one frame; returns per-group power sums and posterior scores."""
    cfg = scenario.pdm_config
    gen = stream.substream(frame_index).generator()
    bits = (uniforms_open(gen, scenario.bits_per_frame) < 0.5).astype(np.uint8)
    data_bits = bits[: cfg.total_input_bits]
    sign_bits = bits[cfg.total_input_bits :]
    frame = pdm_encode(cfg, data_bits)
    clean = np.array_equal(pdm_decode(cfg, frame.amplitudes), data_bits)
    symbols = pas.assemble_frame(
        frame,
        sign_bits,
        pas.SplitMixParity(scenario.parity_seed),
        scenario.deltas,
    )
    y = transmit(symbols.symbols, scenario.gains, gen, scenario.noise_var)
    stats = []
    for sel, m, h, delta in _group_index(scenario):
        c = make_ask(m).with_delta(h * delta)
        fec = make_labeling(BRGC, m)
        probs = _group_symbol_probs(scenario, sel, m)
        log2post = bit_log2_posteriors(
            y[sel], c, fec, probs, scenario.noise_var
        )
        rank = (frame.amplitudes[sel] - 1) // 2
        half = c.size // 2
        point_idx = np.where(
            symbols.symbols[sel] >= 0, half + rank, half - 1 - rank
        )
        sent_bits = fec.table[point_idx]
        cols = np.arange(point_idx.size)
        scores = np.stack(
            [-log2post[i, sent_bits[:, i], cols] for i in range(m)]
        )
        stats.append(
            {
                "power_sum": float(np.sum(symbols.symbols[sel] ** 2)),
                "scores": scores,
                "count": int(point_idx.size),
            }
        )
    return clean, stats


def _group_index(scenario):
    cfg = scenario.pdm_config
    keys = []
    seen = set()
    for m, h, d in zip(
        cfg.channel_m.tolist(), scenario.gains, scenario.deltas
    ):
        key = (int(m), float(h), float(d))
        if key not in seen:
            seen.add(key)
            keys.append(key)
    out = []
    for m, h, d in keys:
        sel = (
            (cfg.channel_m == m)
            & (scenario.gains == h)
            & (scenario.deltas == d)
        )
        out.append((sel, m, h, d))
    return out


def _group_symbol_probs(scenario, sel, m):
    """Composition-induced symbol distribution of one channel group."""
    cfg = scenario.pdm_config
    p1 = np.array([code.n1 / code.n for code in cfg.codes[: m - 1]])
    dist = ProductInputDistribution.from_p1(p1)
    return induced_symbol_distribution(dist, make_labeling(NBBC, m), make_ask(m))


def configure_parallel_run(
    gains,
    power,
    gamma,
    m_max=8,
    channels_per_group=1,
    parity_seed=0,
    noise_var=1.0,
):
    """Build a full parallel-PAS scenario at one sum power.

    Waterfilling sets the powers and the plan; the weighted minimum-energy
    problem sets the shared level targets; per-channel scalings match the
    allocated powers using each group's realized composition energy.
    """
    gains = np.asarray(gains, dtype=float)
    alloc = waterfill(ParallelChannelSet(gains=gains, power=power))
    plan = bit_load(alloc, m_max)
    max_dm = float(plan.level_lengths.sum() / plan.num_channels)
    dm_target = min(max(alloc.sum_se - gamma, 1e-9), max_dm)
    opt = min_weighted_energy_parallel(plan, gains, dm_target)
    scaled = plan.scaled(channels_per_group)
    config = build_parallel_pdm(scaled, level_targets=opt.level_probs)
    gains_plan = gains[scaled.channel_index]
    powers_plan = alloc.powers[scaled.channel_index]
    comp_q = np.array([1.0 - code.n1 / code.n for code in config.codes])
    deltas = np.empty(config.num_channels)
    for m in np.unique(config.channel_m):
        sel = config.channel_m == m
        dist = ProductInputDistribution.from_p1(1.0 - comp_q[: m - 1])
        probs = induced_symbol_distribution(
            dist, make_labeling(NBBC, int(m)), make_ask(int(m))
        )
        energy = float(probs @ make_ask(int(m)).points ** 2)
        deltas[sel] = np.sqrt(powers_plan[sel] / energy)
    return RunScenario(
        pdm_config=config,
        gamma=gamma,
        gains=gains_plan,
        deltas=deltas,
        target_powers=powers_plan,
        parity_seed=parity_seed,
        noise_var=noise_var,
    )


def end_to_end_run(scenario, frames, stream, workers=1):
    """Run frames through matcher, PAS assembly, and the channel.

    The report aggregates per constellation group: empirical symbol power
    against the waterfilling target, Monte Carlo conditional-entropy
    estimates, and the clean-path matcher round-trip count.  Results are
    reduced in frame order, so worker count cannot change them.
    """
    if frames < 2:
        raise ConfigurationError("need at least two frames")
    indices = list(range(frames))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda i: _frame_stats(scenario, i, stream), indices)
            )
    else:
        results = [_frame_stats(scenario, i, stream) for i in indices]

    failures = sum(0 if clean else 1 for clean, _ in results)
    groups = []
    group_meta = _group_index(scenario)
    for g, (sel, m, h, delta) in enumerate(group_meta):
        count = int(sel.sum())
        powers = np.array([stats[g]["power_sum"] / count for _, stats in results])
        scores = np.concatenate(
            [stats[g]["scores"] for _, stats in results], axis=1
        )
        probs = _group_symbol_probs(scenario, sel, m)
        groups.append(
            GroupReport(
                m=m,
                gain=h,
                channels=count,
                target_power=float(scenario.target_powers[sel][0]),
                empirical_power=_estimate(powers),
                conditional_entropy_estimates=tuple(
                    _estimate(scores[i]) for i in range(m)
                ),
                input_entropy=entropy_bits(probs),
            )
        )
    cfg = scenario.pdm_config
    return RunReport(
        frames=frames,
        dm_rate=cfg.total_input_bits / cfg.num_channels,
        roundtrip_failures=failures,
        groups=tuple(groups),
    )
