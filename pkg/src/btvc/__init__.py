"""Bayesian time-varying-constant AR(1) model with long-run regularization."""

__version__ = "0.1.0"

from .conditionals import (
    AlphaPosterior,
    alpha_full_conditional,
    beta_conditional,
    delta_vector,
    log_target,
    rho_conditional,
    sigma_sq_conditional,
)
from .distributions import (
    InvGammaParams,
    MvNormalSpec,
    TruncNormalParams,
    logpdf_mv_normal,
    sample_inv_gamma,
    sample_mv_normal,
    sample_trunc_normal,
)
from .factors import Ar1Fit, PcaDecomposition, YieldPanel, fit_ols_ar1, forecast_dns, pca, reconstruct_curve
from .latent_cov import ArCovParams, LatentCovariance, build_latent_covariance, long_run_variance, solve_tau_sq
from .model import BtvcData, BtvcState, PriorConfig
from .sampler import PosteriorDraws, SamplerConfig, diagnostics, run_chain
