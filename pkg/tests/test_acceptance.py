"""Acceptance suite: every criterion asserted at its stated tolerance.

Each test prints one `criterion N (...): PASS` line (run pytest with -s,
or read captured output); a failed assertion marks the criterion FAIL.
The heavyweight criteria (SNR tables, optimized-rate crossings, parallel
gaps) take a few minutes together.
"""

import math

import numpy as np
import pytest

from pdmshape.allocation import ParallelChannelSet, bit_load, waterfill
from pdmshape.ccdm import design_matcher, dm_decode, dm_encode, matcher_rate
from pdmshape.constellation import (
    BRGC,
    NBBC,
    ProductInputDistribution,
    induced_symbol_distribution,
    make_ask,
    make_labeling,
)
from pdmshape.montecarlo import (
    RandomStream,
    configure_parallel_run,
    end_to_end_run,
    estimate_bmd_terms,
)
from pdmshape.optimizer import (
    maximize_bmd_rate_mb,
    maximize_pdm_rate,
    min_weighted_energy_parallel,
    parallel_gap_summary,
)
from pdmshape.pas import parallel_code_rate, parallel_gamma
from pdmshape.rates import (
    awgn_capacity,
    bicm_capacity,
    bmd_metric,
    bmd_rate,
    conditional_bit_entropies,
    gmi_rate,
    pdm_bmd_rate,
    required_snr,
)
from pdmshape.util import binary_entropy, bits_to_int, int_to_bits

GAINS = np.array([2.0, 1.0, 0.5])


def report(num, name, detail):
    print(f"criterion {num} ({name}): PASS — {detail}")


def scaled_to_snr(c, probs, snr):
    e2 = float(np.asarray(probs) @ c.points**2)
    return c.with_delta(math.sqrt(snr / e2))


def test_criterion_1_capacity_anchor():
    snr_db = required_snr(awgn_capacity, 4.5)
    closed_form = 10 * math.log10(2**9 - 1)
    assert snr_db == pytest.approx(27.08, abs=0.01)
    assert snr_db == pytest.approx(closed_form, abs=1e-3)
    report(1, "capacity anchor", f"required SNR {snr_db:.4f} dB, closed form {closed_form:.4f}")


def test_criterion_2_required_snr_table():
    from pdmshape.cli import snr_table_rows

    rows, cap_db = snr_table_rows(m=6, dm_rate=4.1, gamma=0.4)
    expected = {
        "32-ary-dm": (27.13, 0.10),
        "pdm-1-shaped": (28.29, 0.15),
        "pdm-2-shaped": (27.48, 0.10),
        "pdm-3-shaped": (27.35, 0.10),
        "pdm-4-shaped": (27.32, 0.10),
        "pdm-5-shaped": (27.31, 0.10),
    }
    assert [name for name, _, _ in rows] == list(expected)
    details = []
    for name, snr_db, gap_db in rows:
        want, tol = expected[name]
        assert snr_db == pytest.approx(want, abs=tol), name
        assert gap_db == pytest.approx(snr_db - cap_db, abs=1e-9)
        details.append(f"{name}={snr_db:.3f}")
    report(2, "required-SNR table", ", ".join(details))


def test_criterion_3_optimized_rate_deltas_at_4bpcu():
    m = 6
    c = make_ask(m)
    fec = make_labeling(BRGC, m)
    probs_u = np.full(64, 1 / 64)
    uni_db = required_snr(
        lambda snr: bmd_rate(probs_u, fec, scaled_to_snr(c, probs_u, snr)),
        4.0, 15, 35,
    )
    mb_db = required_snr(lambda snr: maximize_bmd_rate_mb(snr, m).rate, 4.0, 15, 35)
    warm = {"q": None}

    def pdm_rate_at(snr):
        r = maximize_pdm_rate(snr, m, q0=warm["q"])
        warm["q"] = r.level_probs
        return r.rate

    pdm_db = required_snr(pdm_rate_at, 4.0, 15, 35)
    product_penalty = pdm_db - mb_db
    shaping_gain = uni_db - pdm_db
    assert product_penalty == pytest.approx(0.16, abs=0.05)
    assert shaping_gain == pytest.approx(1.8, abs=0.1)
    report(
        3,
        "64-ASK deltas at 4 bpcu",
        f"product penalty {product_penalty:.3f} dB, shaping gain {shaping_gain:.3f} dB",
    )


def test_criterion_4_waterfilling_example():
    alloc = waterfill(ParallelChannelSet(gains=GAINS, power=62.25))
    assert abs(alloc.lam - 1 / 64) <= 1e-6
    for got, want in zip(alloc.powers, (63.75, 63.0, 60.0)):
        assert abs(got - want) <= 1e-6
    for got, want in zip(alloc.ses, (4.0, 3.0, 2.0)):
        assert abs(got - want) <= 1e-6
    assert abs(alloc.sum_se - 3.0) <= 1e-6
    power_db = 10 * math.log10(62.25)
    assert power_db == pytest.approx(17.94, abs=0.005)
    report(4, "waterfilling example", f"lambda=1/64, P*=(63.75,63,60), {power_db:.4f} dB")


def test_criterion_5_parallel_plan_and_distributions():
    alloc = waterfill(ParallelChannelSet(gains=GAINS, power=62.25))
    plan = bit_load(alloc, m_max=8)
    assert plan.channel_m.tolist() == [5, 4, 3]  # 32/16/8-ASK
    scaled = plan.scaled(300)
    assert scaled.level_lengths.tolist() == [900, 900, 600, 300]
    assert scaled.fec_frame_length == 3600
    gamma = 1 / 3
    rc = parallel_code_rate(scaled, gamma)
    assert abs(rc - 5 / 6) < 1e-12
    assert abs(parallel_gamma(scaled, 5 / 6) - gamma) < 1e-12
    res = min_weighted_energy_parallel(plan, GAINS, 3.0 - gamma)
    want_q = (0.1995, 0.3736, 0.4408, 0.4709)
    want_h = (0.7208, 0.9534, 0.9898, 0.9976)
    for got, want in zip(res.level_probs, want_q):
        assert abs(got - want) <= 0.01
    for got, want in zip(res.level_entropies, want_h):
        assert abs(got - want) <= 0.005
    report(
        5,
        "parallel plan + distributions",
        "n=(900,900,600,300), n_c=3600, R_c=5/6, "
        + "q=(" + ", ".join(f"{v:.4f}" for v in res.level_probs) + ")",
    )


def test_criterion_6_parallel_gaps_at_target_se():
    summary = parallel_gap_summary(GAINS, 1 / 3, 3.0, lo_db=12.0, hi_db=24.0)
    assert summary["shaped_gap_db"] <= 0.35
    assert summary["uniform_gap_db"] == pytest.approx(1.22, abs=0.15)
    report(
        6,
        "parallel gaps at 3.0 bpcu",
        f"shaped {summary['shaped_gap_db']:.3f} dB, uniform {summary['uniform_gap_db']:.3f} dB",
    )


def test_criterion_7_matcher_properties():
    checked = 0
    for n in range(1, 17):
        for n1 in range(n + 1):
            code = design_matcher(n, n1 / n)
            seen = set()
            for r in range(1 << code.k):
                d = int_to_bits(r, code.k)
                w = dm_encode(code, d)
                assert int(w.sum()) == n1
                seen.add(w.tobytes())
                assert bits_to_int(dm_decode(code, w)) == r
                checked += 1
            assert len(seen) == 1 << code.k
    big = design_matcher(10800, 0.2)
    rng = np.random.default_rng(20240809)
    for _ in range(1000):
        d = rng.integers(0, 2, big.k).astype(np.uint8)
        w = dm_encode(big, d)
        assert int(w.sum()) == big.n1
        assert np.array_equal(dm_decode(big, w), d)
    rate = matcher_rate(design_matcher(10**4, 0.2))
    assert abs(rate - binary_entropy(0.2)) < 0.01
    report(
        7,
        "matcher properties",
        f"{checked} exhaustive + 1000 long round-trips, k/n={rate:.4f} "
        f"vs H(0.2)={binary_entropy(0.2):.4f}",
    )


def test_criterion_8_rate_identities():
    rng = np.random.default_rng(99)
    # product identity on random product inputs
    worst = 0.0
    for m in (2, 3, 4, 6):
        c = make_ask(m).with_delta(float(rng.uniform(0.4, 1.5)))
        dist = ProductInputDistribution.from_p1(rng.uniform(0.1, 0.9, m - 1))
        dm = make_labeling(NBBC, m)
        fec = make_labeling(BRGC, m)
        probs = induced_symbol_distribution(dist, dm, c)
        gap = abs(pdm_bmd_rate(dist, dm, fec, c) - bmd_rate(probs, fec, c))
        worst = max(worst, gap)
        assert gap <= 1e-9
    # uniform inputs: both evaluations give the BICM capacity of the FEC
    # labeling, independent of the matcher labeling choice
    for m in (3, 4):
        c = make_ask(m).with_delta(1.2)
        probs = np.full(c.size, 1.0 / c.size)
        uni = ProductInputDistribution.uniform(m)
        for feck in (BRGC, NBBC):
            fec = make_labeling(feck, m)
            reference = bicm_capacity(fec, c)
            assert bmd_rate(probs, fec, c) == pytest.approx(reference, abs=1e-6)
            for dmk in (BRGC, NBBC):
                val = pdm_bmd_rate(uni, make_labeling(dmk, m), fec, c)
                assert val == pytest.approx(reference, abs=1e-6)
    # GMI with the BMD metric collapses to the BMD rate
    c = make_ask(3).with_delta(1.1)
    dist = ProductInputDistribution.from_p1([0.85, 0.6])
    probs = induced_symbol_distribution(dist, make_labeling(NBBC, 3), c)
    fec = make_labeling(BRGC, 3)
    gmi_gap = abs(gmi_rate(probs, bmd_metric(probs, fec, c), c) - bmd_rate(probs, fec, c))
    assert gmi_gap <= 1e-9
    report(
        8,
        "rate identities",
        f"product identity <= {worst:.1e}, gmi-bmd gap {gmi_gap:.1e}, "
        "uniform = BICM capacity for all labeling pairs",
    )


def test_criterion_9_monte_carlo_vs_quadrature():
    grids = {3: (0.0, 5.0, 10.0, 15.0, 20.0), 6: (10.0, 15.0, 20.0, 25.0, 30.0)}
    worst_z = 0.0
    for m, snr_grid in grids.items():
        c = make_ask(m)
        lab = make_labeling(BRGC, m)
        probs = np.full(c.size, 1.0 / c.size)
        for i, snr_db in enumerate(snr_grid):
            cs = scaled_to_snr(c, probs, 10 ** (snr_db / 10))
            est = estimate_bmd_terms(probs, lab, cs, 60000, RandomStream(7000 + i, m))
            quad = conditional_bit_entropies(probs, lab, cs)
            for e, q in zip(est, quad):
                tol = max(3 * e.std_error, 0.005)
                assert abs(e.value - q) <= tol
                if e.std_error > 0:
                    worst_z = max(worst_z, abs(e.value - q) / max(e.std_error, 1e-12))
    # determinism regardless of worker count
    scenario = configure_parallel_run(GAINS, 62.25, 1 / 3, channels_per_group=15)
    r1 = end_to_end_run(scenario, 12, RandomStream(55), workers=1)
    r3 = end_to_end_run(scenario, 12, RandomStream(55), workers=3)
    assert repr(r1) == repr(r3)
    report(
        9,
        "Monte Carlo vs quadrature",
        f"5-point grids for 8/64-ASK agree (worst z={worst_z:.2f}); "
        "reports identical across worker counts",
    )


def test_criterion_10_coded_results_excluded():
    # LDPC-coded frame-error results are out of scope by specification;
    # nothing here depends on them.
    report(10, "coded FER results", "excluded by scope, no criterion depends on them")
