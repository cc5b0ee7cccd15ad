import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmshape.ccdm import (
    codebook_output_distribution,
    design_matcher,
    dm_decode,
    dm_encode,
    empirical_distribution,
    matcher_for_input_length,
    matcher_rate,
)
from pdmshape.errors import CompositionError, ConfigurationError, OutOfCodebookError
from pdmshape.util import binary_entropy, bits_to_int, int_to_bits


def test_design_examples():
    assert (design_matcher(4, 0.5).n1, design_matcher(4, 0.5).k) == (2, 2)
    assert (design_matcher(10, 0.2).n1, design_matcher(10, 0.2).k) == (2, 5)
    zero = design_matcher(4, 0.0)
    assert (zero.n1, zero.k) == (0, 0)


def test_design_tie_rounds_down():
    assert design_matcher(5, 0.5).n1 == 2  # 2.5 ties down
    assert design_matcher(10, 0.25).n1 == 2  # 2.5 ties down
    assert design_matcher(2, 0.75).n1 == 1  # 1.5 ties down


def test_design_rejects():
    with pytest.raises(ConfigurationError):
        design_matcher(0, 0.5)
    with pytest.raises(ConfigurationError):
        design_matcher(4, 1.5)


def test_first_colex_word():
    code = design_matcher(4, 0.5)
    assert dm_encode(code, [0, 0]).tolist() == [1, 1, 0, 0]


def test_all_inputs_distinct_weight2():
    code = design_matcher(4, 0.5)
    words = {tuple(dm_encode(code, int_to_bits(r, 2))) for r in range(4)}
    assert len(words) == 4
    assert all(sum(w) == 2 for w in words)


def test_zero_weight_roundtrip():
    code = design_matcher(4, 0.0)
    out = dm_encode(code, np.zeros(0, dtype=np.uint8))
    assert out.tolist() == [0, 0, 0, 0]
    assert dm_decode(code, out).size == 0


@pytest.mark.parametrize("n", range(1, 11))
def test_exhaustive_bijectivity_small(n):
    for n1 in range(n + 1):
        code = design_matcher(n, n1 / n)
        assert code.n1 == n1
        seen = set()
        for r in range(1 << code.k):
            d = int_to_bits(r, code.k)
            w = dm_encode(code, d)
            assert int(w.sum()) == n1
            seen.add(w.tobytes())
            assert np.array_equal(dm_decode(code, w), d)
        assert len(seen) == 1 << code.k


def test_encode_order_preserving_in_colex():
    # the input integer is the colex rank, so encode preserves colex order
    code = design_matcher(7, 3 / 7)
    words = [dm_encode(code, int_to_bits(r, code.k)) for r in range(1 << code.k)]

    def colex_key(w):
        ones = np.flatnonzero(w)
        return tuple(ones[::-1])  # compare highest positions first

    keys = [colex_key(w) for w in words]
    assert keys == sorted(keys)


def test_decode_wrong_weight():
    code = design_matcher(4, 0.5)
    with pytest.raises(CompositionError):
        dm_decode(code, [1, 1, 1, 0])


def test_decode_out_of_codebook():
    # C(5,2) = 10, k = 3: ranks 8, 9 are valid-weight but unreachable
    code = design_matcher(5, 0.4)
    assert code.k == 3
    reachable = {
        tuple(dm_encode(code, int_to_bits(r, 3))) for r in range(8)
    }
    from itertools import combinations

    for ones in combinations(range(5), 2):
        w = np.zeros(5, dtype=np.uint8)
        w[list(ones)] = 1
        if tuple(w) in reachable:
            dm_decode(code, w)
        else:
            with pytest.raises(OutOfCodebookError):
                dm_decode(code, w)


def test_decode_wrong_length():
    code = design_matcher(4, 0.5)
    with pytest.raises(ConfigurationError):
        dm_decode(code, [1, 1, 0])


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_roundtrip_property(data):
    n = data.draw(st.integers(1, 48))
    n1 = data.draw(st.integers(0, n))
    code = matcher_for_input_length(n, math.comb(n, n1).bit_length() - 1)
    rank = data.draw(st.integers(0, (1 << code.k) - 1))
    d = int_to_bits(rank, code.k)
    w = dm_encode(code, d)
    assert int(w.sum()) == code.n1
    assert bits_to_int(dm_decode(code, w)) == rank


def test_large_blocklength_roundtrip():
    code = design_matcher(10800, 0.2)
    assert code.n1 == 2160
    rng = np.random.default_rng(42)
    for _ in range(5):
        d = rng.integers(0, 2, code.k).astype(np.uint8)
        w = dm_encode(code, d)
        assert int(w.sum()) == code.n1
        assert np.array_equal(dm_decode(code, w), d)


def test_matcher_rate_examples():
    assert matcher_rate(design_matcher(4, 0.5)) == 0.5
    assert matcher_rate(design_matcher(17, 0.0)) == 0.0
    big = design_matcher(10**4, 0.2)
    assert abs(matcher_rate(big) - binary_entropy(0.2)) < 0.01


@pytest.mark.parametrize("p1", [0.1, 0.2, 0.3, 0.4])
def test_rate_converges_upward(p1):
    rates = [matcher_rate(design_matcher(n, p1)) for n in (100, 1000, 10000)]
    assert rates[0] <= rates[1] <= rates[2] <= binary_entropy(p1)
    assert binary_entropy(p1) - rates[2] < 0.01


def test_codebook_output_distribution():
    assert codebook_output_distribution(design_matcher(4, 0.5)) == (0.5, 0.5)
    p0, p1 = codebook_output_distribution(design_matcher(10, 0.2))
    assert (p0, p1) == (0.8, 0.2)


def test_empirical_distribution():
    alphabet, probs = empirical_distribution([0, 1, 1, 0])
    assert alphabet.tolist() == [0, 1]
    assert probs.tolist() == [0.5, 0.5]
    alphabet, probs = empirical_distribution([1, 3, 1, 7], alphabet=[1, 3, 5, 7])
    assert probs.tolist() == [0.5, 0.25, 0.0, 0.25]
    with pytest.raises(ConfigurationError):
        empirical_distribution([1, 2], alphabet=[1])


def test_matcher_for_input_length_infeasible():
    # n=4 weights give capacities {0, 2}; k=1 and k=3 are unreachable
    with pytest.raises(ConfigurationError):
        matcher_for_input_length(4, 1)
    with pytest.raises(ConfigurationError):
        matcher_for_input_length(4, 3)
    # k=2 is met by n1 in {1, 2, 3}; the heaviest composition wins
    assert matcher_for_input_length(4, 2).n1 == 3
