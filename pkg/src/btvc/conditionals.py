"""Conditional distributions of the BTVC-AR(1) parameters and the joint log
target used in the Metropolis-Hastings correction.

Indexing: ``alpha[i]`` (0-based) is the intercept of the transition
x_i -> x_{i+1}, so it pairs with ``delta[i] = x[i+1] - beta * x[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    InvGammaParams,
    MvNormalSpec,
    TruncNormalParams,
    logpdf_inv_gamma,
    logpdf_mv_normal,
    logpdf_trunc_normal,
)
from .errors import ConstraintError, ParameterError
from .latent_cov import (
    ArCovParams,
    LatentCovariance,
    beta_upper_bound,
    build_latent_covariance,
    solve_tau_sq,
)
from .model import BtvcData, BtvcState, PriorConfig

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AlphaPosterior:
    """Gaussian full conditional of the extended latent vector.

    ``precision`` is in lower band storage (2, t + h); ``spec`` carries the
    same distribution with its factorization cached for sampling.
    """

    mean: np.ndarray
    precision: np.ndarray
    spec: MvNormalSpec


def delta_vector(data: BtvcData, beta: float, h: int) -> np.ndarray:
    if h < 0:
        raise ParameterError(f"horizon must be >= 0, got {h}")
    out = np.zeros(data.t + h)
    out[: data.t] = data.current - beta * data.lagged
    return out


def alpha_full_conditional(
    data: BtvcData, beta: float, sigma_sq: float, cov: LatentCovariance
) -> AlphaPosterior:
    """Posterior precision = prior precision + diag(1/sigma^2 on the first t
    entries); mean = posterior covariance @ delta / sigma^2."""
    t = data.t
    if cov.n < t:
        raise ParameterError(f"latent covariance has n={cov.n} < t={t}")
    ab = cov.banded()
    ab[0, :t] += 1.0 / sigma_sq
    delta = delta_vector(data, beta, cov.n - t)
    spec = MvNormalSpec(np.zeros(cov.n), ab, is_precision=True, bandwidth=1)
    mean = spec.precision_solve(delta / sigma_sq)
    post = MvNormalSpec(mean, ab, is_precision=True, bandwidth=1)
    # Reuse the factorization already computed for the mean.
    post.__dict__["ldl"] = spec.ldl
    return AlphaPosterior(mean, ab, post)


def rho_conditional(alpha, tau_sq: float, prior: TruncNormalParams) -> TruncNormalParams:
    """Conditional of the latent autocorrelation given the observed latent path.

    ``prior.variance`` is sigma_rho^2; the prior truncation carries over.
    """
    a = np.asarray(alpha, dtype=float)
    if a.shape[0] < 2:
        raise ParameterError("need at least two latent values for the rho conditional")
    if not tau_sq > 0.0:
        raise ParameterError(f"tau_sq must be positive, got {tau_sq}")
    chi = float(a[:-1] @ a[:-1])
    eta = float(a[1:] @ a[:-1])
    var = 1.0 / (chi / tau_sq + 1.0 / prior.variance)
    mean = (eta / tau_sq + prior.mean / prior.variance) * var
    return TruncNormalParams(mean, var, prior.lower, prior.upper)


def beta_prior(prior: PriorConfig, sigma_sq: float) -> TruncNormalParams:
    """beta | sigma^2, truncated to (-1, sqrt((V - sigma^2) / V))."""
    upper = beta_upper_bound(sigma_sq, prior.target_var)
    return TruncNormalParams(prior.mu_beta, sigma_sq * prior.sigma_beta**2, -1.0, upper)


def beta_conditional(data: BtvcData, alpha, sigma_sq: float, prior: PriorConfig) -> TruncNormalParams:
    a = np.asarray(alpha, dtype=float)[: data.t]
    xl = data.lagged
    d = data.current - a
    prior_prec = 1.0 / (sigma_sq * prior.sigma_beta**2)
    var = 1.0 / (float(xl @ xl) / sigma_sq + prior_prec)
    mean = (float(d @ xl) / sigma_sq + prior.mu_beta * prior_prec) * var
    upper = beta_upper_bound(sigma_sq, prior.target_var)
    return TruncNormalParams(mean, var, -1.0, upper)


def residuals(data: BtvcData, alpha, beta: float) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)[: data.t]
    return data.current - a - beta * data.lagged


def sigma_sq_conditional(data: BtvcData, alpha, beta: float, prior: PriorConfig) -> InvGammaParams:
    """Inverse gamma conditional of sigma^2, ignoring the sigma-dependence of
    the beta truncation normalizer."""
    eps = residuals(data, alpha, beta)
    kappa = float(eps @ eps)
    shape = (data.t + 1) / 2.0 + prior.a
    scale = kappa / 2.0 + prior.b + (beta - prior.mu_beta) ** 2 / (2.0 * prior.sigma_beta**2)
    return InvGammaParams(shape, scale)


def log_likelihood(data: BtvcData, alpha, beta: float, sigma_sq: float) -> float:
    eps = residuals(data, alpha, beta)
    return -0.5 * data.t * (_LOG_2PI + math.log(sigma_sq)) - 0.5 * float(eps @ eps) / sigma_sq


def log_alpha_prior(alpha, cov: LatentCovariance) -> float:
    return logpdf_mv_normal(cov.mvn(), alpha)


def log_target(state: BtvcState, data: BtvcData, prior: PriorConfig) -> float:
    """Unnormalized log p(rho, beta, sigma^2 | alpha, x) with tau^2 tied to the others.

    Only the first t latent values enter: the extension beyond the data does
    not touch the likelihood. Inadmissible states return ``-inf``.
    """
    try:
        if not (abs(state.rho) < 1.0 and abs(state.beta) < 1.0 and state.sigma_sq > 0.0):
            return -math.inf
        tau_sq = solve_tau_sq(state.rho, state.beta, state.sigma_sq, prior.target_var)
        bprior = beta_prior(prior, state.sigma_sq)
    except ConstraintError:
        return -math.inf
    if not math.isclose(tau_sq, state.tau_sq, rel_tol=1e-9, abs_tol=0.0):
        return -math.inf
    alpha = np.asarray(state.alpha_tilde, dtype=float)[: data.t]
    cov = build_latent_covariance(ArCovParams(state.rho, tau_sq), data.t)
    return (
        log_likelihood(data, alpha, state.beta, state.sigma_sq)
        + log_alpha_prior(alpha, cov)
        + logpdf_trunc_normal(prior.rho_prior(), state.rho)
        + logpdf_trunc_normal(bprior, state.beta)
        + logpdf_inv_gamma(InvGammaParams(prior.a, prior.b), state.sigma_sq)
    )
