"""Simulation and verification lab for random multiplicative functions.

Steinhaus and Rademacher models, exact partial sums and their
large-prime/smooth split, random Euler products, chaos integrals, and the
Gaussian machinery used to study the maxima of partial sums.
"""

__version__ = "0.1.0"

from .errors import CapacityError, CoverageError, DecompositionError, PreconditionError, RmfError
from .primes import PrimeTable, build_prime_table
from .rmf import ModelKind, RmfSample, constant_sample, hybrid_sample, sample_model, value_at, values_up_to
from .sums import XGrid, partial_sums, parseval_residual, select_R, smooth_sum
from .products import MomentSpec, evaluate_grid, expected_moment_formula, expected_moment_oracle, log_euler_product, log_expected_moment_oracle, monte_carlo_moment
from .chaos import BarrierConfig, WalkSpec, ballot_walk_probability, barrier_A, barrier_D, chaos_integral, coarse_net, probe_chaos_lower
from .gaussian import (
    CovarianceEstimate,
    DeltaRegion,
    FullRectangle,
    conditional_variance,
    covariance_matrix,
    covariance_survey,
    high_moment_survey,
    max_comparison_experiment,
    normal_approx_experiment,
    perron_covariance,
    perron_partial_sum,
    sample_gaussian_vector,
)
from .experiments import ExperimentConfig, ExperimentRecord, emit_report, run_identity_suite, run_moment_scaling, run_large_value_probe

__all__ = [name for name in dir() if not name.startswith("_")]
