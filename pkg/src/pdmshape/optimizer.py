"""Input-distribution optimization for shaped transmission.

Two families of problems live here:

* fixed-rate minimum-energy shaping — choose the bit-level distributions
  so the levels' entropy (weighted by matcher lengths in the parallel
  case) meets a matching-rate target while the transmit energy is
  minimal; solved by bisecting a multiplier that couples energy and
  entropy, with per-level golden-section sweeps inside;
* per-SNR rate maximization — tune the distribution parameters and the
  constellation scaling jointly to maximize a BMD rate at a given SNR,
  for product-level inputs and for the Maxwell-Boltzmann amplitude
  family used as the non-product reference.

Level probabilities are reported in normalized polarity: the returned
value per level is the probability of the less likely bit value (the
high-amplitude selector), always in [0, 0.5].
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rates
from .allocation import ParallelChannelSet, bit_load, waterfill
from .constellation import (
    BRGC,
    NBBC,
    ProductInputDistribution,
    induced_symbol_distribution,
    make_ask,
    make_labeling,
)
from .errors import ConfigurationError, ConvergenceError, InfeasibleRateError
from .util import (
    binary_entropy,
    bisect_root,
    entropy_bits,
    golden_section_min,
    inverse_binary_entropy,
    linear_to_db,
)

_ENTROPY_RESIDUAL = 5e-8
_SWEEP_TOL = 1e-10


@dataclass(frozen=True)
class OptimizationResult:
    """Solution of a fixed-rate minimum-energy problem.

    level_probs[i] is the normalized probability of level i+2's less
    likely bit value; unshaped levels sit at 0.5.
    """

    level_probs: np.ndarray
    level_entropies: np.ndarray
    objective: float
    constraint_residual: float
    iterations: int

    def product_distribution(self):
        """Bit-level distributions with mass on the low amplitudes."""
        return ProductInputDistribution.from_p1(1.0 - self.level_probs)


def rank_distribution(level_probs):
    """Distribution over amplitude ranks induced by normalized level probs.

    Index bits run MSB-first through the levels; P(rank bit = 1) equals
    the level's normalized probability (high-half selector).
    """
    dist = np.ones(1)
    for q in level_probs:
        dist = np.kron(dist, np.array([1.0 - q, q]))
    return dist


def amplitude_energy(level_probs):
    """E[A~^2] of the product amplitude distribution on {1, 3, ...}.

    The amplitude is 2R + 1 with R a sum of independent weighted bits, so
    the second moment follows from the mean and variance of R.
    """
    q = np.asarray(level_probs, dtype=float)
    w = 2.0 ** np.arange(q.size - 1, -1, -1)
    mean = float(w @ q)
    var = float((w * w) @ (q * (1.0 - q)))
    return 4.0 * (var + mean * mean) + 4.0 * mean + 1.0


def _solve_min_energy(energy_fn, weights, target, free, q0=None):
    """Minimize energy subject to sum_i weights[i] H(q_i) = target.

    Levels with free[i] False stay at 0.5.  Bisects a multiplier mu on
    energy - mu * weighted entropy; the inner problem is solved by
    coordinate golden-section sweeps to a fixed point.  The energy is
    multilinear in the level probabilities, so each coordinate's restricted
    objective is rebuilt from two endpoint evaluations before the search.
    The weighted entropy of the inner solution grows with mu, which the
    bracket search verifies.
    """
    weights = np.asarray(weights, dtype=float)
    free = np.asarray(free, dtype=bool)
    n = weights.size
    fixed_part = float(weights[~free].sum())  # H = 1 on unshaped levels
    if target >= float(weights.sum()) - _ENTROPY_RESIDUAL:
        return np.full(n, 0.5), 0  # constraint saturates at uniform levels
    evals = {"count": 0}

    def inner(mu, q_start):
        q = q_start.copy()
        for _ in range(500):
            moved = 0.0
            for i in range(n):
                if not free[i]:
                    continue
                start = q[i]
                q[i] = 0.0
                e0 = energy_fn(q)
                q[i] = 0.5
                slope = (energy_fn(q) - e0) * 2.0  # energy is linear in q[i]
                muw = mu * weights[i]

                def coord(v, e0=e0, slope=slope, muw=muw):
                    return e0 + slope * v - muw * binary_entropy(v)

                v, _ = golden_section_min(coord, 0.0, 0.5, xtol=1e-13)
                moved = max(moved, abs(start - v))
                q[i] = v
            evals["count"] += 1
            if moved < _SWEEP_TOL:
                break
        return q

    def entropy_of(q):
        return fixed_part + float(
            weights[free] @ [binary_entropy(x) for x in q[free]]
        )

    q = q0.copy() if q0 is not None else np.where(free, 0.25, 0.5)
    # bracket mu: entropy grows from ~fixed_part (mu=0) to the maximum
    mu_lo, mu_hi = 0.0, 1.0
    s_lo = fixed_part
    q_hi = inner(mu_hi, q)
    s_hi = entropy_of(q_hi)
    guard = 0
    while s_hi < target:
        if s_hi < s_lo - 1e-9:
            raise ConvergenceError("entropy decreased while raising mu")
        mu_lo, s_lo = mu_hi, s_hi
        mu_hi *= 4.0
        q_hi = inner(mu_hi, q_hi)
        s_hi = entropy_of(q_hi)
        guard += 1
        if guard > 60:
            raise ConvergenceError("entropy target not reached while raising mu")
    # false-position (Illinois) refinement of mu on the verified bracket
    q = q_hi
    side = 0
    for _ in range(200):
        mu = mu_lo + (target - s_lo) * (mu_hi - mu_lo) / (s_hi - s_lo)
        if not mu_lo < mu < mu_hi:
            mu = 0.5 * (mu_lo + mu_hi)
        q = inner(mu, q)
        s = entropy_of(q)
        if abs(s - target) <= _ENTROPY_RESIDUAL:
            break
        if s < target:
            mu_lo, s_lo = mu, s
            if side == -1:
                s_hi = target + 0.5 * (s_hi - target)
            side = -1
        else:
            mu_hi, s_hi = mu, s
            if side == 1:
                s_lo = target - 0.5 * (target - s_lo)
            side = 1
    else:
        raise ConvergenceError(
            f"multiplier search left residual {abs(entropy_of(q) - target):.3g}"
        )
    return q, evals["count"]


def _check_window(target, lo, hi, what):
    if not lo < target <= hi + 1e-12:
        raise InfeasibleRateError(
            f"{what} must lie in ({lo:.6g}, {hi:.6g}], got {target:.6g}"
        )


def min_energy_product_dist(m, dm_rate, shaped_levels=None):
    """Minimum-energy product distribution at a fixed total level entropy.

    Shapes the first `shaped_levels` amplitude levels (default: all m-1);
    the rest stay uniform and contribute one bit of entropy each.
    """
    n_levels = m - 1
    s = n_levels if shaped_levels is None else int(shaped_levels)
    if not 1 <= s <= n_levels:
        raise ConfigurationError(f"shaped level count must be in [1, {n_levels}]")
    _check_window(dm_rate, n_levels - s, n_levels, "matching rate")
    free = np.arange(n_levels) < s
    weights = np.ones(n_levels)
    residual_target = dm_rate - (n_levels - s)
    if s == 1:
        # the single shaped level is entropy-forced; no freedom remains
        q = np.where(free, inverse_binary_entropy(residual_target), 0.5)
        iterations = 0
    else:
        q, iterations = _solve_min_energy(amplitude_energy, weights, dm_rate, free)
    entropies = np.array([binary_entropy(v) for v in q])
    return OptimizationResult(
        level_probs=q,
        level_entropies=entropies,
        objective=amplitude_energy(q),
        constraint_residual=float(abs(entropies @ weights - dm_rate)),
        iterations=iterations,
    )


def parallel_energy_fn(plan, gains_by_plan_order):
    """Weighted-energy objective sum_l E[A_l~^2] / h_l^2 over a plan."""
    groups = []
    for m in np.unique(plan.channel_m):
        sel = plan.channel_m == m
        weight = float(np.sum(1.0 / gains_by_plan_order[sel] ** 2))
        groups.append((int(m) - 1, weight))

    def energy(q):
        return sum(w * amplitude_energy(q[:nlev]) for nlev, w in groups)

    return energy


def min_weighted_energy_parallel(plan, gains, dm_rate, shaped_levels=None, q0=None):
    """Shared level distributions minimizing gain-weighted energy at fixed rate.

    The entropy constraint weights each level by its matcher share
    n_i / L; `gains` are per channel in the original channel order.
    An optional q0 warm-starts the solver.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.size <= int(plan.channel_index.max()):
        raise ConfigurationError("gains array shorter than the plan's channel ids")
    by_plan = gains[plan.channel_index]
    n_levels = plan.m_max - 1
    s = n_levels if shaped_levels is None else int(shaped_levels)
    if not 1 <= s <= n_levels:
        raise ConfigurationError(f"shaped level count must be in [1, {n_levels}]")
    weights = plan.level_lengths / plan.num_channels
    free = np.arange(n_levels) < s
    fixed = float(weights[~free].sum())
    _check_window(dm_rate, fixed, float(weights.sum()), "matching rate")
    energy = parallel_energy_fn(plan, by_plan)
    if s == 1:
        q = np.where(free, inverse_binary_entropy((dm_rate - fixed) / weights[0]), 0.5)
        iterations = 0
    else:
        if q0 is not None and q0.size == n_levels:
            q0 = np.where(free, np.clip(q0, 0.0, 0.5), 0.5)
        else:
            q0 = None
        q, iterations = _solve_min_energy(energy, weights, dm_rate, free, q0=q0)
    entropies = np.array([binary_entropy(v) for v in q])
    return OptimizationResult(
        level_probs=q,
        level_entropies=entropies,
        objective=energy(q),
        constraint_residual=float(abs(entropies @ weights - dm_rate)),
        iterations=iterations,
    )


def maxwell_boltzmann_amplitudes(constellation, nu):
    """Amplitude distribution P(a) ~ exp(-nu a^2) on {1, 3, ..., 2^m - 1}."""
    if nu < 0:
        raise ConfigurationError(f"nu must be nonnegative, got {nu}")
    a = constellation.amplitudes
    w = np.exp(-nu * (a**2 - 1.0))  # shifted for numerical headroom
    return w / w.sum()


def mb_symbol_distribution(constellation, nu):
    """Symmetric symbol distribution with Maxwell-Boltzmann amplitudes."""
    pa = maxwell_boltzmann_amplitudes(constellation, nu)
    return np.concatenate([pa[::-1], pa]) / 2.0


def mb_nu_for_entropy(constellation, target_entropy, tol=1e-12):
    """Solve H(A) = target for the Maxwell-Boltzmann parameter nu."""
    max_h = constellation.m - 1
    if not 0.0 < target_entropy <= max_h:
        raise InfeasibleRateError(
            f"amplitude entropy must be in (0, {max_h}], got {target_entropy}"
        )
    def gap(nu):
        return entropy_bits(maxwell_boltzmann_amplitudes(constellation, nu)) - target_entropy

    if gap(0.0) <= 0.0:
        return 0.0
    hi = 1.0
    while gap(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise ConvergenceError("no nu reaches the requested entropy")
    return bisect_root(gap, 0.0, hi, xtol=tol, max_iter=200)


@dataclass(frozen=True)
class RateOptimum:
    """Best rate found at one SNR, with the tuned distribution parameters."""

    scheme: str
    snr: float
    rate: float
    delta: float
    symbol_probs: np.ndarray
    level_probs: np.ndarray | None = None
    nu: float | None = None
    passes: int = 0


def _scaled_for_snr(constellation, symbol_probs, snr):
    e2 = float(np.asarray(symbol_probs) @ constellation.points**2)
    return constellation.with_delta(math.sqrt(snr / e2))


def maximize_bmd_rate_mb(snr, m=6, quad=rates.DEFAULT_QUAD, nu_hi=None):
    """Maximize the BMD rate over the Maxwell-Boltzmann family at one SNR."""
    c = make_ask(m)
    fec = make_labeling(BRGC, m)
    if nu_hi is None:
        nu_hi = math.log(1e6) / 8.0  # essentially all mass on the lowest amplitude

    def negrate(nu):
        probs = mb_symbol_distribution(c, nu)
        return -rates.bmd_rate(probs, fec, _scaled_for_snr(c, probs, snr), quad=quad)

    nu, neg = golden_section_min(negrate, 0.0, nu_hi, xtol=1e-6)
    probs = mb_symbol_distribution(c, nu)
    return RateOptimum(
        scheme="bmd-mb",
        snr=snr,
        rate=-neg,
        delta=_scaled_for_snr(c, probs, snr).delta,
        symbol_probs=probs,
        nu=nu,
        passes=1,
    )


def maximize_pdm_rate(
    snr, m=6, quad=rates.DEFAULT_QUAD, rate_tol=1e-5, max_passes=40, q0=None
):
    """Maximize the product-input BMD rate over the level probabilities.

    Coordinate golden-section ascent over the normalized probabilities,
    rescaling the constellation to the SNR power at every evaluation;
    stops when a full pass improves the rate by less than rate_tol.
    """
    c = make_ask(m)
    dm = make_labeling(NBBC, m)
    fec = make_labeling(BRGC, m)

    def rate_of(q):
        dist = ProductInputDistribution.from_p1(1.0 - q)
        probs = induced_symbol_distribution(dist, dm, c)
        return rates.bmd_rate(probs, fec, _scaled_for_snr(c, probs, snr), quad=quad)

    q = np.full(m - 1, 0.5) if q0 is None else np.asarray(q0, dtype=float).copy()
    best = rate_of(q)
    passes = 0
    for passes in range(1, max_passes + 1):
        prev = best
        for i in range(m - 1):

            def coord(v, i=i):
                q[i] = v
                return -rate_of(q)

            v, neg = golden_section_min(coord, 0.0, 0.5, xtol=3e-5)
            q[i] = v
            best = -neg
        if best - prev < rate_tol:
            break
    else:
        raise ConvergenceError(f"no convergence within {max_passes} passes")
    dist = ProductInputDistribution.from_p1(1.0 - q)
    probs = induced_symbol_distribution(dist, dm, c)
    return RateOptimum(
        scheme="pdm",
        snr=snr,
        rate=best,
        delta=_scaled_for_snr(c, probs, snr).delta,
        symbol_probs=probs,
        level_probs=q,
        passes=passes,
    )


@dataclass(frozen=True)
class ParallelPoint:
    """One sum-power point of the parallel-channel rate curves."""

    power_db: float
    waterfilling_se: float
    shaped_se: float
    uniform_se: float
    dm_rate_target: float
    level_probs: np.ndarray
    plan: object
    allocation: object


def _group_channels(plan, gains, powers):
    """Distinct (m, gain, power) channel types with multiplicities."""
    by_plan_gain = gains[plan.channel_index]
    by_plan_power = powers[plan.channel_index]
    keys = {}
    for m, h, p in zip(plan.channel_m.tolist(), by_plan_gain, by_plan_power):
        key = (m, float(h), float(p))
        keys[key] = keys.get(key, 0) + 1
    return [(m, h, p, count) for (m, h, p), count in sorted(keys.items(), reverse=True)]


def uniform_parallel_se(gains, power, m_max=8, quad=rates.DEFAULT_QUAD):
    """Average SE of the uniform reference: same powers and plan, uniform inputs."""
    gains = np.asarray(gains, dtype=float)
    alloc = waterfill(ParallelChannelSet(gains=gains, power=power))
    plan = bit_load(alloc, m_max)
    total = 0.0
    for m, h, p_star, count in _group_channels(plan, gains, alloc.powers):
        c = make_ask(m)
        fec = make_labeling(BRGC, m)
        uni = np.full(c.size, 1.0 / c.size)
        delta_u = math.sqrt(p_star / ((4.0**m - 1.0) / 3.0))
        total += count * rates.bmd_rate(uni, fec, c.with_delta(h * delta_u), quad=quad)
    return total / gains.size


def parallel_operating_point(
    gains, power, gamma, m_max=8, quad=rates.DEFAULT_QUAD, q0=None, with_uniform=True
):
    """Evaluate the shaped scheme and its uniform reference at one sum power.

    Waterfilling fixes the powers and the bit loading; the shared level
    distributions solve the weighted minimum-energy problem for the
    matching rate implied by the waterfilling SE and gamma; per-channel
    scalings match the waterfilling powers exactly.
    """
    gains = np.asarray(gains, dtype=float)
    alloc = waterfill(ParallelChannelSet(gains=gains, power=power))
    plan = bit_load(alloc, m_max)
    L = gains.size
    max_dm = float(plan.level_lengths.sum() / plan.num_channels)
    dm_target = min(max(alloc.sum_se - gamma, 1e-9), max_dm)
    opt = min_weighted_energy_parallel(plan, gains, dm_target, q0=q0)
    q = opt.level_probs
    shaped_total = 0.0
    uniform_total = 0.0
    for m, h, p_star, count in _group_channels(plan, gains, alloc.powers):
        c = make_ask(m)
        fec = make_labeling(BRGC, m)
        dm = make_labeling(NBBC, m)
        dist = ProductInputDistribution.from_p1(1.0 - q[: m - 1])
        probs = induced_symbol_distribution(dist, dm, c)
        delta = math.sqrt(p_star / amplitude_energy(q[: m - 1]))
        shaped_total += count * rates.bmd_rate(
            probs, fec, c.with_delta(h * delta), quad=quad
        )
        if with_uniform:
            uni = np.full(c.size, 1.0 / c.size)
            delta_u = math.sqrt(p_star / ((4.0**m - 1.0) / 3.0))
            uniform_total += count * rates.bmd_rate(
                uni, fec, c.with_delta(h * delta_u), quad=quad
            )
    return ParallelPoint(
        power_db=float(linear_to_db(power)),
        waterfilling_se=alloc.sum_se,
        shaped_se=shaped_total / L,
        uniform_se=uniform_total / L if with_uniform else float("nan"),
        dm_rate_target=dm_target,
        level_probs=q,
        plan=plan,
        allocation=alloc,
    )


def shaped_parallel_curve(gains, power_db_grid, gamma, m_max=8, quad=rates.DEFAULT_QUAD):
    """Waterfilling, shaped, and uniform average SE over a sum-power grid."""
    return [
        parallel_operating_point(gains, 10.0 ** (db / 10.0), gamma, m_max, quad)
        for db in power_db_grid
    ]


def power_db_for_se(se_fn, target_se, lo_db, hi_db, tol_bits=1e-6):
    """Sum power (dB) at which a monotone SE-vs-power function hits a target."""
    return bisect_root(
        lambda db: se_fn(10.0 ** (db / 10.0)) - target_se,
        lo_db,
        hi_db,
        ftol=tol_bits,
        max_iter=100,
    )


def parallel_gap_summary(
    gains, gamma, target_se, m_max=8, quad=rates.DEFAULT_QUAD, lo_db=5.0, hi_db=30.0
):
    """Sum-power gaps of the shaped scheme and the uniform reference.

    Finds the powers at which the waterfilling bound, the shaped scheme,
    and the uniform reference reach the target average SE, and reports
    the dB gaps to the waterfilling power.
    """
    gains = np.asarray(gains, dtype=float)

    def wf_se(p):
        return waterfill(ParallelChannelSet(gains=gains, power=p)).sum_se

    wf_db = power_db_for_se(wf_se, target_se, lo_db, hi_db, tol_bits=1e-9)
    warm = {"q": None}

    def shaped_se(p):
        pt = parallel_operating_point(
            gains, p, gamma, m_max, quad, q0=warm["q"], with_uniform=False
        )
        warm["q"] = pt.level_probs
        return pt.shaped_se

    shaped_db = power_db_for_se(shaped_se, target_se, lo_db, hi_db)
    uniform_db = power_db_for_se(
        lambda p: uniform_parallel_se(gains, p, m_max, quad),
        target_se,
        lo_db,
        hi_db,
    )
    return {
        "target_se": target_se,
        "waterfilling_power_db": wf_db,
        "shaped_power_db": shaped_db,
        "uniform_power_db": uniform_db,
        "shaped_gap_db": shaped_db - wf_db,
        "uniform_gap_db": uniform_db - wf_db,
    }
