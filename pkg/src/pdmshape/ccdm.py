"""Fixed-to-fixed binary distribution matcher with constant composition.

The matcher maps k uniform data bits to an n-bit word containing exactly
n1 ones.  It is realized as exact combinatorial ranking/unranking: the
data bits, read as an integer, index into the colexicographic order of
all weight-n1 words, using arbitrary-precision integers throughout.  The
map is therefore exactly invertible by construction, and k is the largest
integer with 2^k <= C(n, n1).

Colex order compares the highest differing one-position; the rank of the
word with one-positions c_1 < c_2 < ... < c_w is sum_j C(c_j, j).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CompositionError, ConfigurationError, OutOfCodebookError
from .util import bits_to_int, int_to_bits

try:  # ~3x faster big-integer loop when gmpy2 is around; plain ints otherwise
    from gmpy2 import bincoef as _comb, mpz as _mpz
except ImportError:  # pragma: no cover
    _comb = math.comb
    _mpz = int


@dataclass(frozen=True)
class MatcherCode:
    """Constant-composition code: n output bits, n1 ones, k input bits."""

    n: int
    n1: int
    k: int

    def __post_init__(self):
        if not 0 <= self.n1 <= self.n:
            raise ConfigurationError(f"need 0 <= n1 <= n, got n1={self.n1}, n={self.n}")
        cap = math.comb(self.n, self.n1)
        if self.k != cap.bit_length() - 1:
            raise ConfigurationError(
                f"k must be floor(log2 C(n, n1)) = {cap.bit_length() - 1}, got {self.k}"
            )


def design_matcher(n, p1):
    """Choose the composition closest to an ones-fraction p1.

    n1 is the nearest integer to n*p1 with exact halves rounded down,
    and k = floor(log2 C(n, n1)).
    """
    if n < 1:
        raise ConfigurationError(f"output length must be >= 1, got {n}")
    if not 0.0 <= p1 <= 1.0:
        raise ConfigurationError(f"p1 must be in [0, 1], got {p1}")
    n1 = math.ceil(n * p1 - 0.5)
    n1 = min(max(n1, 0), n)
    k = math.comb(n, n1).bit_length() - 1
    return MatcherCode(n=n, n1=n1, k=k)


def matcher_for_input_length(n, k, prefer_high_weight=True):
    """Find a composition whose capacity floor(log2 C(n, n1)) equals k.

    Among matching weights, prefer the largest n1 when
    ``prefer_high_weight`` (more ones, i.e. more low-amplitude selections
    downstream), else the smallest.
    """
    matches = [
        n1 for n1 in range(n + 1) if math.comb(n, n1).bit_length() - 1 == k
    ]
    if not matches:
        raise ConfigurationError(
            f"no composition of length {n} has input length exactly {k}"
        )
    n1 = max(matches) if prefer_high_weight else min(matches)
    return MatcherCode(n=n, n1=n1, k=k)


def matcher_rate(code):
    """Matcher rate k/n in bits per output symbol."""
    return code.k / code.n


def codebook_output_distribution(code):
    """Per-symbol output distribution (P(0), P(1)); exact by constant composition."""
    p1 = code.n1 / code.n
    return (1.0 - p1, p1)


def empirical_distribution(sequence, alphabet=None):
    """Empirical distribution of a sequence over an alphabet.

    With no alphabet given, the sorted set of distinct values is used.
    Returns (alphabet, probabilities).
    """
    seq = np.asarray(sequence)
    if seq.size == 0:
        raise ConfigurationError("empirical distribution of empty sequence")
    if alphabet is None:
        alphabet = np.unique(seq)
    alphabet = np.asarray(alphabet)
    counts = np.array([(seq == a).sum() for a in alphabet], dtype=float)
    if counts.sum() != seq.size:
        raise ConfigurationError("sequence contains values outside the alphabet")
    return alphabet, counts / seq.size


def dm_encode(code, data_bits):
    """Map k data bits to the weight-n1 word with that colex rank."""
    bits = np.asarray(data_bits, dtype=np.uint8)
    if bits.size != code.k:
        raise ConfigurationError(f"expected {code.k} data bits, got {bits.size}")
    rank = bits_to_int(bits)
    return _unrank_colex(rank, code.n, code.n1)


def dm_decode(code, word):
    """Recover the data bits from a matcher output word.

    Raises CompositionError when the weight is not n1 and
    OutOfCodebookError when the colex rank is >= 2^k (a valid-weight word
    the encoder can never emit, i.e. a corrupted input).
    """
    w = np.asarray(word, dtype=np.uint8)
    if w.size != code.n:
        raise ConfigurationError(f"expected {code.n} symbols, got {w.size}")
    weight = int(w.sum())
    if weight != code.n1:
        raise CompositionError(
            f"composition violation: weight {weight}, expected {code.n1}"
        )
    rank = _rank_colex(w)
    if rank >> code.k:
        raise OutOfCodebookError(
            f"valid composition but rank {rank} >= 2^{code.k}"
        )
    return int_to_bits(rank, code.k)


def _unrank_colex(rank, n, weight):
    """Word (as 0/1 array) at a colex rank among weight-`weight` words."""
    total = math.comb(n, weight)
    if not 0 <= rank < total:
        raise OutOfCodebookError(f"rank {rank} outside [0, C({n},{weight}))")
    out = np.zeros(n, dtype=np.uint8)
    if weight == 0:
        return out
    rank = _mpz(rank)
    c = n - 1
    binom = _comb(c, weight)  # C(c, j) for the running candidate c
    for j in range(weight, 0, -1):
        while binom > rank:
            # C(c-1, j) from C(c, j)
            binom = binom * (c - j) // c
            c -= 1
        out[c] = 1
        rank -= binom
        # C(c-1, j-1) from C(c, j), then step the candidate below c
        binom = binom * j // c if c > 0 else _mpz(0)
        c -= 1
    return out


def _rank_colex(word):
    """Colex rank of a 0/1 word among the words of its weight."""
    ones = np.flatnonzero(np.asarray(word)).tolist()
    rank = _mpz(0)
    binom = _mpz(1)  # C(c_j, j), stepped across one-positions via gap products
    prev = 0  # previous one-position c_{j-1}
    for j, c in enumerate(ones, start=1):
        if j == 1:
            binom = _mpz(c)  # C(c, 1)
        elif binom == 0:
            # previous ones were packed at the left edge (C(prev, j-1) = 0);
            # the ratio form cannot leave 0, so recompute once
            binom = _comb(c, j)
        else:
            # C(c, j) = C(prev, j-1) * prod(prev+1..c) / (j * prod(prev-j+2..c-j))
            num = 1
            for t in range(prev + 1, c + 1):
                num *= t
            den = j
            for t in range(prev - j + 2, c - j + 1):
                den *= t
            binom = binom * num // den
        rank += binom
        prev = c
    return int(rank)
