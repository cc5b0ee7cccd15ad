import math

import numpy as np
import pytest

from pdmshape.allocation import ParallelChannelSet, bit_load, make_plan, waterfill
from pdmshape.constellation import make_ask
from pdmshape.errors import ConfigurationError, InfeasibleRateError
from pdmshape.optimizer import (
    amplitude_energy,
    maximize_bmd_rate_mb,
    maximize_pdm_rate,
    maxwell_boltzmann_amplitudes,
    mb_nu_for_entropy,
    mb_symbol_distribution,
    min_energy_product_dist,
    min_weighted_energy_parallel,
    parallel_operating_point,
    rank_distribution,
    shaped_parallel_curve,
    uniform_parallel_se,
)
from pdmshape.util import binary_entropy, entropy_bits, inverse_binary_entropy

GAINS = np.array([2.0, 1.0, 0.5])
TABLE_PLAN = bit_load(waterfill(ParallelChannelSet(gains=GAINS, power=62.25)), 8)


def test_amplitude_energy_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(100):
        q = rng.uniform(0, 0.5, rng.integers(1, 6))
        dist = rank_distribution(q)
        amps = 2.0 * np.arange(dist.size) + 1.0
        assert amplitude_energy(q) == pytest.approx(float(dist @ amps**2), abs=1e-9)


def test_min_energy_single_forced_level():
    res = min_energy_product_dist(6, 4.1, shaped_levels=1)
    assert res.level_probs[0] == pytest.approx(inverse_binary_entropy(0.1), abs=1e-9)
    assert np.all(res.level_probs[1:] == 0.5)
    assert res.constraint_residual < 1e-6


def test_min_energy_uniform_feasible():
    res = min_energy_product_dist(6, 5.0)
    assert np.allclose(res.level_probs, 0.5)
    # sign symmetry: E[A^2] equals E[X~^2] = (4^m - 1)/3 under uniform inputs
    assert res.objective == pytest.approx((4.0**6 - 1) / 3, abs=1e-6)
    c = make_ask(6)
    probs = np.full(c.size, 1 / c.size)
    assert res.objective == pytest.approx(float(probs @ c.points**2), abs=1e-6)


def test_min_energy_more_levels_lower_energy():
    energies = [
        min_energy_product_dist(6, 4.1, shaped_levels=s).objective for s in (1, 2, 3, 4, 5)
    ]
    assert all(b < a for a, b in zip(energies, energies[1:]))


def test_min_energy_monotone_in_rate():
    e_tight = min_energy_product_dist(4, 2.2).objective
    e_loose = min_energy_product_dist(4, 2.0).objective
    assert e_loose < e_tight


def test_min_energy_infeasible_rates():
    with pytest.raises(InfeasibleRateError):
        min_energy_product_dist(6, 5.2)
    with pytest.raises(InfeasibleRateError):
        min_energy_product_dist(6, 3.9, shaped_levels=1)  # below m-1-s = 4
    with pytest.raises(ConfigurationError):
        min_energy_product_dist(6, 4.1, shaped_levels=9)


def test_constraint_residuals_within_contract():
    for s in (2, 3, 5):
        res = min_energy_product_dist(6, 4.1, shaped_levels=s)
        assert res.constraint_residual <= 1e-6
        assert np.all(res.level_probs >= 0.0)
        assert np.all(res.level_probs <= 0.5)


def test_table_distribution_reproduction():
    res = min_weighted_energy_parallel(TABLE_PLAN, GAINS, 3.0 - 1.0 / 3.0)
    want_q = [0.1995, 0.3736, 0.4408, 0.4709]
    want_h = [0.7208, 0.9534, 0.9898, 0.9976]
    for got, want in zip(res.level_probs, want_q):
        assert abs(got - want) <= 0.01
    for got, want in zip(res.level_entropies, want_h):
        assert abs(got - want) <= 0.005
    assert res.constraint_residual <= 1e-6


def test_parallel_reduces_to_single_when_equal():
    plan = make_plan([4, 4, 4])
    res_par = min_weighted_energy_parallel(plan, np.ones(3), 2.4)
    res_single = min_energy_product_dist(4, 2.4)
    assert np.allclose(res_par.level_probs, res_single.level_probs, atol=1e-6)


def test_parallel_max_rate_gives_uniform():
    plan = TABLE_PLAN
    max_rate = float(plan.level_lengths.sum() / plan.num_channels)
    res = min_weighted_energy_parallel(plan, GAINS, max_rate)
    assert np.allclose(res.level_probs, 0.5, atol=1e-9)


def test_restart_stability():
    rng = np.random.default_rng(123)
    target = 3.0 - 1.0 / 3.0
    objectives = []
    for _ in range(5):
        q0 = rng.uniform(0.0, 0.5, 4)
        res = min_weighted_energy_parallel(TABLE_PLAN, GAINS, target, q0=q0)
        objectives.append(res.objective)
    assert max(objectives) - min(objectives) < 1e-6


def test_polarity_flip_same_amplitude_distribution():
    res = min_energy_product_dist(5, 3.1)
    q = res.level_probs
    base = rank_distribution(q)
    flipped = rank_distribution(1.0 - q)  # complementary solution
    # complementing every level reverses the rank order: same multiset of probs
    assert np.allclose(np.sort(base), np.sort(flipped), atol=1e-12)
    assert sum(binary_entropy(v) for v in q) == pytest.approx(
        sum(binary_entropy(1 - v) for v in q)
    )


def test_mb_family():
    c = make_ask(6)
    assert np.allclose(
        maxwell_boltzmann_amplitudes(c, 0.0), np.full(32, 1 / 32)
    )
    nu = mb_nu_for_entropy(c, 4.1)
    pa = maxwell_boltzmann_amplitudes(c, nu)
    assert entropy_bits(pa) == pytest.approx(4.1, abs=1e-9)
    assert np.all(np.diff(pa) < 0)  # heavier on small amplitudes
    px = mb_symbol_distribution(c, nu)
    assert px.sum() == pytest.approx(1.0)
    assert np.allclose(px, px[::-1])
    with pytest.raises(InfeasibleRateError):
        mb_nu_for_entropy(c, 5.5)


def test_maximize_mb_rate_beats_uniform():
    from pdmshape.constellation import BRGC, make_labeling
    from pdmshape.rates import bmd_rate

    snr = 10 ** (24.0 / 10.0)
    opt = maximize_bmd_rate_mb(snr, 6)
    c = make_ask(6)
    probs = np.full(64, 1 / 64)
    uni = bmd_rate(
        probs, make_labeling(BRGC, 6), c.with_delta(math.sqrt(snr / 1365.0))
    )
    assert opt.rate > uni + 0.1
    assert opt.nu > 0


def test_maximize_pdm_rate_high_snr_near_saturation():
    snr = 10 ** (40.0 / 10.0)
    opt = maximize_pdm_rate(snr, 3)
    assert opt.rate > 2.9  # approaches m bits, shaping gain vanishes
    assert np.all(opt.level_probs > 0.4)


def test_parallel_operating_point_at_target():
    pt = parallel_operating_point(GAINS, 62.25, 1.0 / 3.0)
    assert pt.waterfilling_se == pytest.approx(3.0, abs=1e-9)
    assert pt.dm_rate_target == pytest.approx(8 / 3, abs=1e-9)
    assert pt.shaped_se < 3.0
    assert pt.shaped_se > pt.uniform_se
    assert pt.shaped_se > 2.9
    assert pt.plan.channel_m.tolist() == [5, 4, 3]


def test_uniform_parallel_se_matches_point():
    pt = parallel_operating_point(GAINS, 62.25, 1.0 / 3.0)
    assert uniform_parallel_se(GAINS, 62.25) == pytest.approx(
        pt.uniform_se, abs=1e-9
    )


def test_shaped_curve_monotone_and_bounded():
    grid = [16.0, 17.0, 18.0, 19.0]
    points = shaped_parallel_curve(GAINS, grid, 1.0 / 3.0)
    shaped = [p.shaped_se for p in points]
    assert all(b > a for a, b in zip(shaped, shaped[1:]))
    for p in points:
        assert p.shaped_se <= p.waterfilling_se + 1e-9  # converse bound
        assert p.uniform_se <= p.shaped_se + 1e-9
