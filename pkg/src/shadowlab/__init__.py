"""Finite-time shadowing of random pseudotrajectories of linear skew products over the Bernoulli shift."""

from .cocycle import (
    BirkhoffSums, LambdaTable, SkewState, birkhoff_log_sums, eval_lambda, expected_log,
    skew_step, tilde_compress,
)
from .errors import *  # noqa: F401,F403
from .experiment import Estimate, SweepResult, TrialRecord, estimate_p, sweep_N
from .kernels import BACKEND
from .ldp import (
    RateModel, block_rate_function, build_rate_model, cramer_transform, empirical_deviation_exact,
    empirical_deviation_pseudo, fit_quadratic_constants, gamma_threshold, wilson_interval,
)
from .pseudo import PseudoTrajectory, generate_pseudo, normalize_start, residuals
from .shadow import (
    ShadowSolution, chebyshev_center, minimax_radius, optimal_initial_condition, pair_bound,
    shadow_attempt, splice_shadow_base,
)
from .symbolic import SymbolPoint, agreement_radius, ball_sample, distance, sample_point, shift

__version__ = "0.1.0"
