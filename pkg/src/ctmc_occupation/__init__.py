"""Verification laboratory for occupation measures of sped-up continuous-time Markov chains."""

from .chain_algebra import (
    ChainInvariants,
    GeneratorMatrix,
    chain_invariants,
    deviation_matrix,
    limit_covariances,
    stationary,
    validate_generator,
    verify_identities,
)
from .path_sim import (
    CtmcPath,
    ScalingParams,
    compensator,
    dynkin_martingale,
    fluctuation_process,
    indicator,
    occupation_measure,
    simulate_path,
)
from .stoch_integral import (
    OccupationIntegrand,
    PiecewiseFunction,
    integrate_wrt_dynkin,
    integrate_wrt_indicator,
    integrate_wrt_occupation,
    limit_integral_covariance,
    scaled_variation_condition,
)

__version__ = "0.1.0"
