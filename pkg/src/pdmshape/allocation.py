"""Power allocation across parallel Gaussian channels and constellation assignment.

Channels are Y_l = h_l X_l + Z_l with unit-variance noise and an average
sum-power budget (1/L) sum E[X_l^2] <= P.  The Gaussian-input optimum is
waterfilling; constellation exponents then follow the rule-of-thumb
m_l ~ C_l + 1, clamped to [2, m_max].
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError
from .util import bisect_root, golden_section_min


@dataclass(frozen=True)
class ParallelChannelSet:
    """Channel gains plus the average power budget (linear units)."""

    gains: np.ndarray
    power: float

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        object.__setattr__(self, "gains", g)
        if g.size < 1 or np.any(g <= 0):
            raise ConfigurationError("need at least one channel with positive gain")
        if not self.power > 0:
            raise ConfigurationError(f"power budget must be positive, got {self.power}")


@dataclass(frozen=True)
class Allocation:
    """Waterfilling solution: per-channel powers and spectral efficiencies."""

    gains: np.ndarray
    powers: np.ndarray
    lam: float
    ses: np.ndarray

    @property
    def water_level(self):
        return 1.0 / self.lam

    @property
    def sum_se(self):
        """Average spectral efficiency over the channels."""
        return float(np.mean(self.ses))

    @property
    def average_power(self):
        return float(np.mean(self.powers))


def waterfill(channels):
    """Maximize the average Gaussian SE under the sum-power constraint.

    Bisects the water-level parameter lambda until the average of
    [1/lambda - 1/h^2]+ meets the budget, then assigns
    C_l = 0.5 log2(h_l^2 / lambda) to active channels.
    """
    h2 = channels.gains**2
    target = channels.power

    def surplus(lam):
        return np.maximum(1.0 / lam - 1.0 / h2, 0.0).mean() - target

    lo = float(h2.min()) * 2.0**-128
    hi = float(h2.max())
    lam = bisect_root(surplus, lo, hi, max_iter=200)
    powers = np.maximum(1.0 / lam - 1.0 / h2, 0.0)
    active = powers > 0
    ses = np.where(active, 0.5 * np.log2(np.maximum(h2 / lam, 1.0)), 0.0)
    return Allocation(gains=channels.gains, powers=powers, lam=lam, ses=ses)


def waterfilling_sum_se(channels):
    """The waterfilling benchmark C_WF(P)."""
    return waterfill(channels).sum_se


@dataclass(frozen=True)
class BitLoadingPlan:
    """Constellation exponents per channel, ordered by nonincreasing m.

    channel_index maps each plan position back to the original channel,
    so per-channel quantities (gains, powers) can be aligned with the
    plan's ordering.
    """

    channel_m: np.ndarray
    channel_index: np.ndarray

    def __post_init__(self):
        cm = np.asarray(self.channel_m, dtype=np.int64)
        idx = np.asarray(self.channel_index, dtype=np.int64)
        object.__setattr__(self, "channel_m", cm)
        object.__setattr__(self, "channel_index", idx)
        if cm.size != idx.size:
            raise ConfigurationError("channel_m and channel_index sizes differ")
        if cm.size and np.any(np.diff(cm) > 0):
            raise ConfigurationError("plan channels must be ordered by nonincreasing m")
        if cm.size and cm[-1] < 2:
            raise ConfigurationError("plan contains m < 2")

    @property
    def num_channels(self):
        return int(self.channel_m.size)

    @property
    def m_max(self):
        return int(self.channel_m[0])

    @property
    def levels(self):
        return np.arange(2, self.m_max + 1)

    @property
    def group_counts(self):
        """nu_i = number of channels using 2^i-ASK, for i = 2..m_max."""
        return np.array(
            [(self.channel_m == i).sum() for i in self.levels], dtype=np.int64
        )

    @property
    def level_lengths(self):
        """Shared-matcher output lengths n_i = #{l : m_l >= i}."""
        return np.array(
            [(self.channel_m >= i).sum() for i in self.levels], dtype=np.int64
        )

    @property
    def fec_frame_length(self):
        """Bits per FEC frame: one sign per channel plus all amplitude bits."""
        return int(self.num_channels + self.level_lengths.sum())

    def scaled(self, count):
        """Repeat every channel `count` times (channels-per-group expansion)."""
        if count < 1:
            raise ConfigurationError(f"count must be >= 1, got {count}")
        return BitLoadingPlan(
            channel_m=np.repeat(self.channel_m, count),
            channel_index=np.repeat(self.channel_index, count),
        )


def make_plan(channel_m):
    """Plan from explicit per-channel exponents (any order)."""
    cm = np.asarray(channel_m, dtype=np.int64)
    order = np.argsort(-cm, kind="stable")
    return BitLoadingPlan(channel_m=cm[order], channel_index=order)


def bit_load(allocation, m_max):
    """Assign constellation exponents m_l ~ C_l + 1 from a waterfilling solution.

    Round-half-up, clamped to [2, m_max]; channels with zero allocated
    power are left out of the plan.
    """
    if m_max < 2:
        raise ConfigurationError(f"m_max must be >= 2, got {m_max}")
    active = np.flatnonzero(allocation.powers > 0)
    exps = np.floor(allocation.ses[active] + 1.5).astype(np.int64)
    exps = np.clip(exps, 2, m_max)
    order = np.argsort(-exps, kind="stable")
    return BitLoadingPlan(channel_m=exps[order], channel_index=active[order])


@dataclass(frozen=True)
class DiscretePowerResult:
    """Result of the numerical sum-rate power optimizer."""

    powers: np.ndarray
    rates: np.ndarray
    average_rate: float
    kkt_residual: float
    sweeps: int


def discrete_power_allocation(
    channels, rate_functions, rate_tol=1e-10, max_sweeps=200
):
    """Maximize (1/L) sum R_l(P_l) under the sum-power constraint.

    Projected coordinate ascent via pairwise power transfers: each sweep
    optimizes the transfer between every channel pair with a golden
    section search, which keeps the iterate exactly on the power simplex.
    Suited to concave nondecreasing per-channel rate functions (e.g.
    quadrature-evaluated rates of shaped discrete inputs).
    """
    L = channels.gains.size
    budget = channels.power * L
    powers = np.full(L, channels.power)

    def total(p):
        return sum(rate_functions[i](p[i]) for i in range(L))

    best = total(powers)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        improved = 0.0
        for i in range(L):
            for j in range(i + 1, L):
                span = powers[i] + powers[j]
                if span <= 0:
                    continue

                def negpair(t, i=i, j=j, span=span):
                    return -(rate_functions[i](t) + rate_functions[j](span - t))

                t, neg = golden_section_min(
                    negpair, 0.0, span, xtol=1e-12 * max(span, 1.0)
                )
                old = rate_functions[i](powers[i]) + rate_functions[j](powers[j])
                if -neg > old:
                    improved += -neg - old
                    powers[i], powers[j] = t, span - t
        if improved < rate_tol:
            break
    else:
        raise ConvergenceError(
            f"power optimizer did not settle within {max_sweeps} sweeps"
        )
    # KKT check: equal marginal rates on active channels, no incentive on idle ones
    h = 1e-7 * max(budget, 1.0)
    grads = np.array(
        [
            (rate_functions[i](powers[i] + h) - rate_functions[i](max(powers[i] - h, 0.0)))
            / (h + min(powers[i], h))
            for i in range(L)
        ]
    )
    active = powers > h
    mu = grads[active].mean() if np.any(active) else 0.0
    residual = 0.0
    if np.any(active):
        residual = float(np.max(np.abs(grads[active] - mu)))
    if np.any(~active):
        residual = max(residual, float(np.max(grads[~active] - mu, initial=0.0)))
    rates = np.array([rate_functions[i](powers[i]) for i in range(L)])
    return DiscretePowerResult(
        powers=powers,
        rates=rates,
        average_rate=float(rates.mean()),
        kkt_residual=residual,
        sweeps=sweeps,
    )
