"""PAS frame assembly and rate accounting.

Shaped amplitudes are combined with signs: a fraction gamma of the signs
carries extra data bits, the rest carries the parity of a systematic FEC
code over the amplitude bits and the data signs.  Only the accounting
and the bit plumbing live here; actual channel decoding is out of scope,
so the default parity source is a seeded pseudorandom generator standing
in for the parity-generating part of a systematic encoder.
"""

from dataclasses import dataclass

import numpy as np

from .constellation import BRGC, make_labeling
from .errors import ConfigurationError

_MASK64 = (1 << 64) - 1


def gamma_from_code_rate(code_rate, m):
    """Fraction of signs carrying data for a rate R_c code on 2^m-ASK."""
    gamma = 1.0 - (1.0 - code_rate) * m
    if not -1e-12 <= gamma <= 1.0 + 1e-12:
        raise ConfigurationError(
            f"code rate {code_rate} infeasible for m={m}: PAS needs "
            f"R_c in [{(m - 1) / m:.6f}, 1] so that gamma stays in [0, 1]"
        )
    return min(max(gamma, 0.0), 1.0)


def code_rate_from_gamma(gamma, m):
    """FEC code rate implied by the data-sign fraction gamma."""
    if not -1e-12 <= gamma <= 1.0 + 1e-12:
        raise ConfigurationError(f"gamma must be in [0, 1], got {gamma}")
    return (m - 1 + min(max(gamma, 0.0), 1.0)) / m


def parallel_code_rate(plan, gamma):
    """Code rate over a bit-loading plan: sum (i-1+gamma) nu_i / sum i nu_i."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError(f"gamma must be in [0, 1], got {gamma}")
    nu = plan.group_counts
    levels = plan.levels
    return float(((levels - 1 + gamma) * nu).sum() / (levels * nu).sum())


def parallel_gamma(plan, code_rate):
    """Data-sign fraction implied by a code rate over a bit-loading plan."""
    nu = plan.group_counts
    levels = plan.levels
    gamma = 1.0 - (1.0 - code_rate) * float((levels * nu).sum() / nu.sum())
    if not -1e-12 <= gamma <= 1.0 + 1e-12:
        raise ConfigurationError(
            f"code rate {code_rate} infeasible for this plan: gamma = {gamma:.6f}"
        )
    return min(max(gamma, 0.0), 1.0)


def transmission_rate(dm_rate, gamma):
    """Data bits per channel use: matched amplitude bits plus data signs."""
    if dm_rate < 0 or gamma < 0:
        raise ConfigurationError("rates must be nonnegative")
    return dm_rate + gamma


def fec_frame_length(plan):
    """FEC blocklength n_c = L sign bits + all shared-level amplitude bits."""
    return plan.fec_frame_length


@dataclass(frozen=True)
class PasConfig:
    """Consistent PAS operating point (single constellation or plan)."""

    dm_rate: float
    gamma: float
    code_rate: float
    tx_rate: float
    m: int | None = None
    plan: object = None

    @staticmethod
    def for_single(m, dm_rate, gamma=None, code_rate=None):
        if (gamma is None) == (code_rate is None):
            raise ConfigurationError("give exactly one of gamma and code_rate")
        if gamma is None:
            gamma = gamma_from_code_rate(code_rate, m)
        else:
            code_rate = code_rate_from_gamma(gamma, m)
        return PasConfig(
            dm_rate=dm_rate,
            gamma=gamma,
            code_rate=code_rate,
            tx_rate=transmission_rate(dm_rate, gamma),
            m=m,
        )

    @staticmethod
    def for_plan(plan, dm_rate, gamma=None, code_rate=None):
        if (gamma is None) == (code_rate is None):
            raise ConfigurationError("give exactly one of gamma and code_rate")
        if gamma is None:
            gamma = parallel_gamma(plan, code_rate)
        else:
            code_rate = parallel_code_rate(plan, gamma)
        return PasConfig(
            dm_rate=dm_rate,
            gamma=gamma,
            code_rate=code_rate,
            tx_rate=transmission_rate(dm_rate, gamma),
            plan=plan,
        )


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class SplitMixParity:
    """Pseudorandom stand-in for the parity part of a systematic encoder.

    Parity bits come from a splitmix64 stream (increment 0x9E3779B97F4A7C15,
    finalizer constants 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB) whose state
    is seeded from the configured seed and absorbs the systematic bits in
    64-bit chunks, so the parity is a deterministic function of the
    systematic input, as for a real encoder.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK64

    def parity_bits(self, systematic_bits, count):
        bits = np.asarray(systematic_bits, dtype=np.uint8)
        packed = np.packbits(bits) if bits.size else np.zeros(0, dtype=np.uint8)
        pad = (-packed.size) % 8
        packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
        state = self.seed
        for chunk in packed.view(">u8").tolist():
            state, _ = _splitmix64(state ^ int(chunk))
        words = []
        for _ in range((count + 63) // 64):
            state, z = _splitmix64(state)
            words.append(z)
        if not words:
            return np.zeros(0, dtype=np.uint8)
        raw = np.array(words, dtype=">u8").view(np.uint8)
        return np.unpackbits(raw)[:count]


@dataclass(frozen=True)
class SymbolFrame:
    """Assembled PAS symbols with data/parity sign bookkeeping.

    symbols[j] = (2 s_j - 1) * a_j * delta_j; sign bit 0 maps to the
    negative point.  The first data_sign_count signs carry data, the rest
    carry parity.
    """

    symbols: np.ndarray
    amplitudes: np.ndarray
    sign_bits: np.ndarray
    data_sign_count: int
    deltas: np.ndarray


def amplitude_fec_bits(frame):
    """BRGC amplitude labels of a frame, concatenated channel by channel.

    These are the systematic amplitude bits as seen by the FEC encoder;
    the labeling is independent of the one used inside the matcher.
    """
    out = []
    labelings = {}
    for m in np.unique(frame.channel_m):
        labelings[int(m)] = make_labeling(BRGC, int(m))
    for m, a in zip(frame.channel_m.tolist(), frame.amplitudes.tolist()):
        lab = labelings[m]
        index = (1 << (m - 1)) + (a - 1) // 2  # positive point, ascending order
        out.append(lab.table[index, 1:])
    return np.concatenate(out) if out else np.zeros(0, dtype=np.uint8)


def assemble_frame(frame, data_signs, parity_encoder, deltas):
    """Combine amplitudes with data and parity signs into channel symbols."""
    L = frame.amplitudes.size
    data_signs = np.asarray(data_signs, dtype=np.uint8)
    if data_signs.size > L:
        raise ConfigurationError(
            f"{data_signs.size} data signs for {L} symbols"
        )
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (L,))
    parity_count = L - data_signs.size
    systematic = np.concatenate([amplitude_fec_bits(frame), data_signs])
    parity = np.asarray(
        parity_encoder.parity_bits(systematic, parity_count), dtype=np.uint8
    )
    if parity.size != parity_count:
        raise ConfigurationError(
            f"parity encoder returned {parity.size} bits, expected {parity_count}"
        )
    sign_bits = np.concatenate([data_signs, parity])
    signs = 2.0 * sign_bits - 1.0
    symbols = signs * frame.amplitudes * deltas
    return SymbolFrame(
        symbols=symbols,
        amplitudes=frame.amplitudes.copy(),
        sign_bits=sign_bits,
        data_sign_count=int(data_signs.size),
        deltas=np.array(deltas),
    )
