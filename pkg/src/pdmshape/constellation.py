"""ASK constellations, bit labelings, and bit-level/symbol distribution algebra.

An amplitude-shift-keying constellation with 2^m points lives on the odd
integers {±1, ±3, ..., ±(2^m - 1)} and is scaled by a positive factor
``delta`` before transmission.  Two labelings are supported:

* BRGC — binary reflected Gray code over the points in ascending order;
  adjacent points differ in exactly one bit.
* NBBC — sign bit plus the natural binary code of the amplitude rank.
  Bit value 1 at an amplitude level selects the lower-amplitude half of
  the surviving points (the rank is read from the complemented bits), so
  a shaped source with mass on small amplitudes has P(bit = 1) > 0.5.

In both labelings bit 1 is the sign bit (0 for negative points) and the
remaining bits are identical for x and -x.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .util import binary_entropy

BRGC = "brgc"
NBBC = "nbbc"


@dataclass(frozen=True)
class AskConstellation:
    """2^m-ASK signal set with scaling delta."""

    m: int
    points: np.ndarray
    delta: float = 1.0

    @property
    def size(self):
        return 1 << self.m

    @property
    def amplitudes(self):
        """Positive amplitude set {1, 3, ..., 2^m - 1}, ascending."""
        return self.points[self.size // 2 :]

    @property
    def scaled_points(self):
        return self.delta * self.points

    def with_delta(self, delta):
        if delta < 0:
            raise ConfigurationError(f"delta must be nonnegative, got {delta}")
        return replace(self, delta=float(delta))


def make_ask(m, delta=1.0):
    """Build the normalized 2^m-ASK constellation {±1, ..., ±(2^m-1)}."""
    if not 2 <= m <= 16:
        raise ConfigurationError(f"bits per symbol must be in [2, 16], got {m}")
    points = np.arange(-(2**m) + 1, 2**m, 2, dtype=float)
    return AskConstellation(m=m, points=points, delta=float(delta))


@dataclass(frozen=True)
class Labeling:
    """Bijective map from constellation points to m-bit labels.

    ``table[j, i]`` is bit i+1 (1-based level i+1) of the point with index
    j in ascending point order.  Level 1 is the sign bit.
    """

    kind: str
    m: int
    table: np.ndarray

    def level_bits(self, level):
        """Column of bit values for 1-based level in [1, m]."""
        if not 1 <= level <= self.m:
            raise ConfigurationError(f"level {level} out of range 1..{self.m}")
        return self.table[:, level - 1]

    def label_of(self, point_index):
        return self.table[point_index]


def make_labeling(kind, m):
    """Construct a BRGC or NBBC labeling for 2^m-ASK."""
    if m < 2:
        raise ConfigurationError(f"labeling needs m >= 2, got {m}")
    size = 1 << m
    half = size // 2
    codes = np.empty(size, dtype=np.int64)
    if kind == BRGC:
        j = np.arange(size)
        codes = j ^ (j >> 1)
    elif kind == NBBC:
        # Point index j: sign 0 for j < half; amplitude rank r counts up
        # from the smallest amplitude; amplitude bits are ~r (rank from
        # complemented bits, so bit 1 selects the lower half).
        j = np.arange(size)
        sign = (j >= half).astype(np.int64)
        rank = np.where(sign == 1, j - half, half - 1 - j)
        amp_code = (half - 1) - rank
        codes = (sign << (m - 1)) | amp_code
    else:
        raise ConfigurationError(f"unknown labeling kind {kind!r}")
    shifts = np.arange(m - 1, -1, -1)
    table = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return Labeling(kind=kind, m=m, table=table)


@dataclass(frozen=True)
class BitLevelDistribution:
    """Bernoulli distribution of one amplitude bit-level; p1 = P(bit = 1)."""

    p1: float

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ConfigurationError(f"p1 must be in [0, 1], got {self.p1}")

    @property
    def entropy(self):
        return binary_entropy(self.p1)


@dataclass(frozen=True)
class ProductInputDistribution:
    """Independent bit-levels 2..m over a uniform sign level.

    The induced symbol distribution is P(x) = 0.5 * prod_i P_Bi(b_i(x)),
    so H(X) = 1 + sum_i H(B_i) exactly.
    """

    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def m(self):
        return len(self.levels) + 1

    @property
    def entropy(self):
        return 1.0 + sum(lvl.entropy for lvl in self.levels)

    @staticmethod
    def uniform(m):
        return ProductInputDistribution(
            tuple(BitLevelDistribution(0.5) for _ in range(m - 1))
        )

    @staticmethod
    def from_p1(p1_values):
        return ProductInputDistribution(
            tuple(BitLevelDistribution(float(p)) for p in p1_values)
        )


def induced_symbol_distribution(dist, labeling, constellation):
    """Symbol probabilities over the constellation points (ascending order)."""
    m = constellation.m
    if dist.m != m:
        raise ConfigurationError(
            f"distribution has {dist.m - 1} levels, constellation needs {m - 1}"
        )
    if labeling.m != m:
        raise ConfigurationError("labeling size does not match constellation")
    probs = np.full(constellation.size, 0.5)
    for i, lvl in enumerate(dist.levels, start=2):
        bits = labeling.level_bits(i)
        probs *= np.where(bits == 1, lvl.p1, 1.0 - lvl.p1)
    return probs


def amplitude_distribution(symbol_probs, constellation):
    """Fold a symmetric symbol distribution onto the amplitude set."""
    half = constellation.size // 2
    p = np.asarray(symbol_probs, dtype=float)
    return p[half:] + p[half - 1 :: -1]


def second_moment(symbol_probs, constellation):
    """E[X^2] of the scaled constellation under the given distribution."""
    p = np.asarray(symbol_probs, dtype=float)
    return float(np.sum(p * constellation.scaled_points**2))
