"""Probabilistic amplitude shaping with product distribution matching.

Shaped transmission over single and parallel AWGN channels: exact binary
constant-composition matchers, product distribution matching with shared
bit-levels, PAS rate accounting, BMD achievable-rate quadrature,
waterfilling and bit-loading, input-distribution optimizers, and a
reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .allocation import (
    Allocation,
    BitLoadingPlan,
    ParallelChannelSet,
    bit_load,
    discrete_power_allocation,
    make_plan,
    waterfill,
    waterfilling_sum_se,
)
from .ccdm import (
    MatcherCode,
    codebook_output_distribution,
    design_matcher,
    dm_decode,
    dm_encode,
    empirical_distribution,
    matcher_rate,
)
from .constellation import (
    BRGC,
    NBBC,
    AskConstellation,
    BitLevelDistribution,
    Labeling,
    ProductInputDistribution,
    amplitude_distribution,
    induced_symbol_distribution,
    make_ask,
    make_labeling,
    second_moment,
)
from .errors import (
    BracketError,
    CompositionError,
    ConfigurationError,
    ConvergenceError,
    InfeasibleRateError,
    OutOfCodebookError,
    PdmShapeError,
    QuadratureError,
)
from .montecarlo import (
    McEstimate,
    RandomStream,
    RunScenario,
    bit_posteriors,
    configure_parallel_run,
    end_to_end_run,
    estimate_bmd_terms,
    transmit,
)
from .optimizer import (
    OptimizationResult,
    RateOptimum,
    maximize_bmd_rate_mb,
    maximize_pdm_rate,
    maxwell_boltzmann_amplitudes,
    mb_nu_for_entropy,
    mb_symbol_distribution,
    min_energy_product_dist,
    min_weighted_energy_parallel,
    parallel_gap_summary,
    parallel_operating_point,
    shaped_parallel_curve,
)
from .pas import (
    PasConfig,
    SplitMixParity,
    SymbolFrame,
    assemble_frame,
    code_rate_from_gamma,
    fec_frame_length,
    gamma_from_code_rate,
    parallel_code_rate,
    parallel_gamma,
    transmission_rate,
)
from .pdm import (
    AmplitudeFrame,
    PdmConfig,
    asymptotic_pdm_rate,
    build_parallel_pdm,
    build_pdm,
    pdm_decode,
    pdm_encode,
    pdm_rate,
)
from .rates import (
    QuadratureSpec,
    RatePoint,
    awgn_capacity,
    bicm_capacity,
    bmd_metric,
    bmd_rate,
    conditional_bit_entropies,
    gmi_rate,
    mutual_information,
    pdm_bmd_rate,
    required_snr,
    symbol_posterior_metric,
)
