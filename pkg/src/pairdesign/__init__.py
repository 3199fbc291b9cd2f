"""Design, exact evaluation, and verification of randomized two-arm trials
with binary outcomes.

The package builds three design families (complete randomization,
blocking, pair matching), computes the estimator's exact mean squared
error in closed form, verifies every structural claim against brute-force
enumeration, and replicates design comparisons by Monte Carlo with a
compiled hot kernel and a pure-NumPy fallback.
"""

from .core import (Allocation, AssumptionViolation, BlockPartition,
                   CovarianceMatrix, MatchSet, PairDesignError, PartitionError,
                   ResponseModel, Subjects, validate_design_assumptions)
from .designs import (bcrd, covariance_matrix, empirical_covariance,
                      enumerate_support, sample_allocation,
                      sorted_block_partition, sorted_pair_matching)
from .estimators import (LogisticModelSpec, TrialOutcome, diff_in_means,
                         link_eval, log_odds_ratio, logistic_fit)
from .matching import (brute_force_matching, mahalanobis_distance_matrix,
                       matchset_to_partition, min_weight_perfect_matching)
from .mse import (bcrd_expected_r_squared, block_quadratic_form,
                  corner_max_quadratic_form, exact_mse, match_r_squared,
                  mse_gap_bcrd_pm, pm_quadratic_form, quadratic_form, tau)
from .rng import SplitMix64, derive_seed
from .simulation import (DesignSpec, SimConfig, SimResult, draw_responses,
                         logistic_quantile_grid, parametric_bootstrap,
                         run_monte_carlo)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "AssumptionViolation", "BlockPartition", "CovarianceMatrix",
    "DesignSpec", "LogisticModelSpec", "MatchSet", "PairDesignError",
    "PartitionError", "ResponseModel", "SimConfig", "SimResult", "SplitMix64",
    "Subjects", "TrialOutcome", "bcrd", "bcrd_expected_r_squared",
    "block_quadratic_form", "brute_force_matching", "corner_max_quadratic_form",
    "covariance_matrix", "derive_seed", "diff_in_means", "draw_responses",
    "empirical_covariance", "enumerate_support", "exact_mse", "link_eval",
    "log_odds_ratio", "logistic_fit", "logistic_quantile_grid",
    "mahalanobis_distance_matrix", "match_r_squared", "matchset_to_partition",
    "min_weight_perfect_matching", "mse_gap_bcrd_pm", "parametric_bootstrap",
    "pm_quadratic_form", "quadratic_form", "run_monte_carlo",
    "sample_allocation", "sorted_block_partition", "sorted_pair_matching",
    "tau", "validate_design_assumptions",
]
