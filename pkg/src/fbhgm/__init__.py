"""Fisher-Bingham normalizing constants on S^d and maximum likelihood fits.

Z(x, y, r) = int_{S^d(r)} exp(sum_{i<=j} x_ij t_i t_j + sum_i y_i t_i) |dt|
"""
from .errors import (AcceptanceTooLow, AllStartsFailed, BoundInvalid, EigenvalueCollision,
                     FBError, IntegrationError, MaxSteps, NonFinite, SeriesOverflow,
                     SingularFactor, StepUnderflow, ValidationError)
from .hgm import (ErrorEstimate, eval_diag_state, eval_full_state, hgm_extend, lambda_scale,
                  normalizing_constant, p_r_matrix, perturbed_ensemble, rotate_to_full)
from .mle import MleConfig, MleResult, hgd_run, loglik, loglik_gradient, mle_pipeline, \
    nelder_mead_warmstart
from .model import (Dataset, DiagParams, DiagStateVector, FullParams, OrthogonalFrame,
                    StateVector, SufficientStats, diagonalize, sufficient_stats)
from .ode import OdeSettings
from .oracle import mc_normalizing_constant, mc_state, rejection_sample
from .series import series_state, series_value, surface_area, truncation_bound

__version__ = "0.1.0"

__all__ = [
    "AcceptanceTooLow", "AllStartsFailed", "BoundInvalid", "EigenvalueCollision", "FBError",
    "IntegrationError", "MaxSteps", "NonFinite", "SeriesOverflow", "SingularFactor",
    "StepUnderflow", "ValidationError",
    "ErrorEstimate", "eval_diag_state", "eval_full_state", "hgm_extend", "lambda_scale",
    "normalizing_constant", "p_r_matrix", "perturbed_ensemble", "rotate_to_full",
    "MleConfig", "MleResult", "hgd_run", "loglik", "loglik_gradient", "mle_pipeline",
    "nelder_mead_warmstart",
    "Dataset", "DiagParams", "DiagStateVector", "FullParams", "OrthogonalFrame", "StateVector",
    "SufficientStats", "diagonalize", "sufficient_stats",
    "OdeSettings", "mc_normalizing_constant", "mc_state", "rejection_sample",
    "series_state", "series_value", "surface_area", "truncation_bound",
]
