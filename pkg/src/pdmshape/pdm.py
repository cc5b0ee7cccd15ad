"""Product distribution matcher: parallel binary matchers behind a bit mapper.

Data bits are demultiplexed into one block per amplitude bit-level; each
block feeds a binary constant-composition matcher; the matched bit-planes
are recombined into amplitudes.  A single 2^m-ASK stream of length n is
the special case of n parallel channels that all carry 2^m-ASK, so one
implementation serves both the single-channel matcher and the
shared-bit-level matcher for parallel channels with mixed constellation
sizes.

Channel positions are ordered by nonincreasing constellation exponent
m_l.  Level i (2 <= i <= m) exists on the channels with m_l >= i, which
form a contiguous prefix; its matcher output length is the prefix length
n_i.  The level-i bit of a channel is bit i of the channel's NBBC label,
so bit value 1 selects the lower-amplitude half among the points still
in play (amplitude rank = complemented label bits).

Level targets are given in normalized polarity: a target q is the
probability of bit value 0 (the high-amplitude selector), q in [0, 0.5],
matching the convention in which shaped levels report the probability of
their less likely bit value.
"""

from dataclasses import dataclass

import numpy as np

from .ccdm import (
    MatcherCode,
    design_matcher,
    dm_decode,
    dm_encode,
    matcher_for_input_length,
)
from .errors import CompositionError, ConfigurationError, OutOfCodebookError
from .util import binary_entropy


@dataclass(frozen=True)
class PdmConfig:
    """Per-level matcher codes over a nonincreasing channel layout."""

    channel_m: np.ndarray
    codes: tuple

    def __post_init__(self):
        cm = np.asarray(self.channel_m, dtype=np.int64)
        object.__setattr__(self, "channel_m", cm)
        if cm.size == 0:
            raise ConfigurationError("empty channel layout")
        if np.any(np.diff(cm) > 0):
            raise ConfigurationError("channels must be ordered by nonincreasing m")
        if cm[-1] < 2:
            raise ConfigurationError("smallest supported constellation is 4-ASK (m=2)")
        lengths = self.level_lengths
        if len(self.codes) != lengths.size:
            raise ConfigurationError(
                f"need {lengths.size} level codes, got {len(self.codes)}"
            )
        for i, (code, n_i) in enumerate(zip(self.codes, lengths), start=2):
            if code.n != n_i:
                raise ConfigurationError(
                    f"level {i} matcher length {code.n} != required {n_i}"
                )

    @property
    def m(self):
        """Largest constellation exponent."""
        return int(self.channel_m[0])

    @property
    def num_channels(self):
        return int(self.channel_m.size)

    @property
    def level_lengths(self):
        """Matcher output lengths n_i for levels 2..m."""
        levels = np.arange(2, int(self.channel_m[0]) + 1)
        return (self.channel_m[None, :] >= levels[:, None]).sum(axis=1)

    @property
    def input_lengths(self):
        """Data block sizes k_i for levels 2..m."""
        return np.array([code.k for code in self.codes], dtype=np.int64)

    @property
    def total_input_bits(self):
        return int(self.input_lengths.sum())


@dataclass(frozen=True)
class AmplitudeFrame:
    """One matched frame: an amplitude per channel, channels ordered as in the config."""

    channel_m: np.ndarray
    amplitudes: np.ndarray


def _build(channel_m, level_targets=None, level_input_lengths=None):
    channel_m = np.sort(np.asarray(channel_m, dtype=np.int64))[::-1]
    m = int(channel_m[0])
    levels = np.arange(2, m + 1)
    lengths = (channel_m[None, :] >= levels[:, None]).sum(axis=1)
    if (level_targets is None) == (level_input_lengths is None):
        raise ConfigurationError(
            "give exactly one of level_targets and level_input_lengths"
        )
    codes = []
    if level_targets is not None:
        targets = np.asarray(level_targets, dtype=float)
        if targets.size != lengths.size:
            raise ConfigurationError(
                f"need {lengths.size} level targets for levels 2..{m}, got {targets.size}"
            )
        if np.any(targets < 0.0) or np.any(targets > 0.5):
            raise ConfigurationError(
                "level targets are normalized bit probabilities in [0, 0.5]"
            )
        for n_i, q in zip(lengths, targets):
            # the matcher emits label bits, whose ones fraction is 1 - q
            codes.append(design_matcher(int(n_i), 1.0 - float(q)))
    else:
        ks = [int(k) for k in level_input_lengths]
        if len(ks) != lengths.size:
            raise ConfigurationError(
                f"need {lengths.size} level input lengths, got {len(ks)}"
            )
        for n_i, k_i in zip(lengths, ks):
            codes.append(matcher_for_input_length(int(n_i), k_i))
    return PdmConfig(channel_m=channel_m, codes=tuple(codes))


def build_pdm(m, n, level_targets=None, level_input_lengths=None):
    """Single-stream PDM for 2^m-ASK with n output amplitudes."""
    if m < 2:
        raise ConfigurationError(f"need m >= 2, got {m}")
    if n < 1:
        raise ConfigurationError(f"need n >= 1, got {n}")
    return _build(np.full(n, m), level_targets, level_input_lengths)


def build_parallel_pdm(plan, level_targets=None, level_input_lengths=None):
    """PDM over a bit-loading plan, sharing low bit-levels across channels."""
    if plan.num_channels == 0:
        raise ConfigurationError("empty bit-loading plan")
    return _build(plan.channel_m, level_targets, level_input_lengths)


def pdm_rate(config):
    """Matched data bits per channel use, sum(k_i) / L."""
    return config.total_input_bits / config.num_channels


def asymptotic_pdm_rate(config):
    """Large-n limit of the rate: composition entropies weighted by n_i / L."""
    total = 0.0
    for code, n_i in zip(config.codes, config.level_lengths):
        total += binary_entropy(code.n1 / code.n) * n_i
    return total / config.num_channels


def pdm_encode(config, data_bits):
    """Encode sum(k_i) data bits into one amplitude per channel."""
    bits = np.asarray(data_bits, dtype=np.uint8)
    if bits.size != config.total_input_bits:
        raise ConfigurationError(
            f"expected {config.total_input_bits} data bits, got {bits.size}"
        )
    ranks = np.zeros(config.num_channels, dtype=np.int64)
    offset = 0
    for level, code in enumerate(config.codes, start=2):
        block = bits[offset : offset + code.k]
        offset += code.k
        plane = dm_encode(code, block)
        width = config.channel_m[: code.n] - level
        # label bit 1 selects the lower half: rank bits are complemented
        ranks[: code.n] += (1 - plane.astype(np.int64)) << width
    return AmplitudeFrame(
        channel_m=config.channel_m, amplitudes=2 * ranks + 1
    )


def pdm_decode(config, amplitudes):
    """Invert pdm_encode; reports the offending level on composition errors."""
    amps = np.asarray(amplitudes, dtype=np.int64)
    if amps.size != config.num_channels:
        raise ConfigurationError(
            f"expected {config.num_channels} amplitudes, got {amps.size}"
        )
    top = (np.int64(1) << config.channel_m) - 1
    bad = (amps < 1) | (amps > top) | (amps % 2 == 0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise CompositionError(
            f"channel {j}: amplitude {amps[j]} not a valid "
            f"2^{int(config.channel_m[j])}-ASK amplitude"
        )
    ranks = (amps - 1) // 2
    blocks = []
    for level, code in enumerate(config.codes, start=2):
        width = config.channel_m[: code.n] - level
        plane = (1 - ((ranks[: code.n] >> width) & 1)).astype(np.uint8)
        try:
            blocks.append(dm_decode(code, plane))
        except CompositionError as exc:
            raise CompositionError(f"level {level}: {exc}", level=level) from exc
        except OutOfCodebookError as exc:
            raise OutOfCodebookError(f"level {level}: {exc}") from exc
    if not blocks:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate(blocks)
