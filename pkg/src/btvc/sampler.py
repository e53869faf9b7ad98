"""Metropolis-Hastings within Gibbs sampler for the BTVC-AR(1) model.

Each iteration has two blocks:

1. Gibbs: draw the extended latent vector from its Gaussian full conditional.
2. MH: propose (rho, sigma^2, beta) from the fixed-tau^2 conditionals, each
   conditioned on the *current* values of the others, set tau^2 from the
   long-run variance constraint and accept or reject.

The MH target only involves the latent values tied to data, so after an
accepted move the latent extension beyond the data is redrawn from its AR(1)
law given the last in-sample value and the new (rho, tau^2). That keeps every
retained state a draw from the joint posterior rather than mixing the
extension of one parameter value with another.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .conditionals import (
    alpha_full_conditional,
    beta_conditional,
    log_target,
    rho_conditional,
    sigma_sq_conditional,
)
from .distributions import (
    logpdf_inv_gamma,
    logpdf_trunc_normal,
    sample_inv_gamma,
    sample_mv_normal,
    sample_trunc_normal,
)
from .errors import ConstraintError, DivergenceError, ParameterError
from .latent_cov import BETA_BOUND_GUARD, ArCovParams, beta_upper_bound, build_latent_covariance, solve_tau_sq
from .model import BtvcData, BtvcState, PriorConfig

log = logging.getLogger(__name__)

SCALAR_PARAMS = ("beta", "sigma_sq", "rho", "tau_sq")
MAX_INADMISSIBLE_RUN = 10_000


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 10_000
    burn_in: int = 2_000
    thinning: int = 1
    seed: int = 0
    horizon: int = 0
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ParameterError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ParameterError(f"need 0 <= burn_in < iterations, got {self.burn_in}")
        if self.thinning < 1:
            raise ParameterError(f"thinning must be >= 1, got {self.thinning}")
        if self.horizon < 0:
            raise ParameterError(f"horizon must be >= 0, got {self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def n_retained(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thinning)


@dataclass
class PosteriorDraws:
    """Retained chain states stored column-wise.

    ``alpha_tilde`` has shape (M, t + h); the scalar arrays have length M.
    """

    alpha_tilde: np.ndarray
    beta: np.ndarray
    sigma_sq: np.ndarray
    rho: np.ndarray
    tau_sq: np.ndarray
    t: int
    acceptance_rate: float
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.beta.shape[0]

    @property
    def horizon(self) -> int:
        return self.alpha_tilde.shape[1] - self.t

    @property
    def alpha_tail(self) -> np.ndarray:
        return self.alpha_tilde[:, self.t :]

    def state(self, m: int) -> BtvcState:
        return BtvcState(
            self.alpha_tilde[m], float(self.beta[m]), float(self.sigma_sq[m]), float(self.rho[m]), float(self.tau_sq[m])
        )

    @property
    def states(self) -> list[BtvcState]:
        return [self.state(m) for m in range(len(self))]

    def scalar(self, name: str) -> np.ndarray:
        return getattr(self, name)


def initial_state(data: BtvcData, cfg: SamplerConfig) -> BtvcState:
    """Start with beta and rho at their prior means, sigma^2 at the residual
    variance of the no-intercept OLS AR(1) and the latent path at zero.

    Starting beta at the OLS slope is a trap on near-integrated data: the slope
    sits at the truncation bound, tau^2 collapses, the latent draws shrink to
    zero and the beta proposal keeps returning the OLS slope.
    """
    prior = cfg.prior
    xl, xc = data.lagged, data.current
    denom = float(xl @ xl)
    slope = float(xl @ xc) / denom if denom > 0.0 else prior.mu_beta
    resid = xc - slope * xl
    sigma_sq = float(resid @ resid) / max(data.t - 1, 1)
    if not 0.0 < sigma_sq < prior.target_var:
        sigma_sq = min(max(sigma_sq, 1e-6 * prior.target_var), 0.5 * prior.target_var)
    upper = beta_upper_bound(sigma_sq, prior.target_var)
    beta = min(max(prior.mu_beta, -upper + 1e-3), upper - 1e-3)
    rho = min(max(prior.mu_rho, -1.0 + 1e-6), 1.0 - 1e-6)
    tau_sq = solve_tau_sq(rho, beta, sigma_sq, prior.target_var)
    return BtvcState(np.zeros(data.t + cfg.horizon), beta, sigma_sq, rho, tau_sq)


def log_acceptance_ratio(
    data: BtvcData, alpha: np.ndarray, old: BtvcState, new: BtvcState, prior: PriorConfig
) -> float:
    """log[p(new) q(old | new)] - log[p(old) q(new | old)] for the (rho, sigma^2, beta) block.

    The forward proposal conditions rho on the current tau^2, sigma^2 on the
    current beta and beta on the current sigma^2; the reverse swaps roles.
    """
    lp_new = log_target(BtvcState(alpha, new.beta, new.sigma_sq, new.rho, new.tau_sq), data, prior)
    if lp_new == -math.inf:
        return -math.inf
    lp_old = log_target(BtvcState(alpha, old.beta, old.sigma_sq, old.rho, old.tau_sq), data, prior)
    q_fwd = _log_proposal(data, alpha, given=old, at=new, prior=prior)
    q_rev = _log_proposal(data, alpha, given=new, at=old, prior=prior)
    return lp_new - lp_old + q_rev - q_fwd


def _log_proposal(data: BtvcData, alpha: np.ndarray, given: BtvcState, at: BtvcState, prior: PriorConfig) -> float:
    return (
        logpdf_trunc_normal(rho_conditional(alpha, given.tau_sq, prior.rho_prior()), at.rho)
        + logpdf_inv_gamma(sigma_sq_conditional(data, alpha, given.beta, prior), at.sigma_sq)
        + logpdf_trunc_normal(beta_conditional(data, alpha, given.sigma_sq, prior), at.beta)
    )


def _propose(data, alpha, cur: BtvcState, prior: PriorConfig, rng) -> BtvcState | None:
    rho = sample_trunc_normal(rho_conditional(alpha, cur.tau_sq, prior.rho_prior()), rng)
    sigma_sq = sample_inv_gamma(sigma_sq_conditional(data, alpha, cur.beta, prior), rng)
    beta = sample_trunc_normal(beta_conditional(data, alpha, cur.sigma_sq, prior), rng)
    if not sigma_sq < prior.target_var:
        return None
    try:
        tau_sq = solve_tau_sq(rho, beta, sigma_sq, prior.target_var)
    except ConstraintError:
        return None
    return BtvcState(alpha, beta, sigma_sq, rho, tau_sq)


def _extend_latent(alpha_tilde: np.ndarray, t: int, rho: float, tau_sq: float, rng) -> None:
    """Redraw alpha_{t+1..t+h} from the AR(1) law given alpha_t, in place."""
    h = alpha_tilde.shape[0] - t
    if h == 0:
        return
    eta = rng.standard_normal(h) * math.sqrt(tau_sq)
    alpha_tilde[t:] = lfilter([1.0], [1.0, -rho], eta, zi=[rho * alpha_tilde[t - 1]])[0]


def run_chain(data: BtvcData, cfg: SamplerConfig, init: BtvcState | None = None) -> PosteriorDraws:
    """Run one chain; fully determined by ``cfg.seed``."""
    if not isinstance(data, BtvcData):
        data = BtvcData(data)
    prior = cfg.prior
    rng = np.random.default_rng(cfg.seed)
    t, n = data.t, data.t + cfg.horizon
    cur = init if init is not None else initial_state(data, cfg)

    m_keep = cfg.n_retained
    out_alpha = np.empty((m_keep, n))
    out = {name: np.empty(m_keep) for name in SCALAR_PARAMS}
    accepted = 0
    inadmissible_run = 0
    k = 0

    for it in range(cfg.iterations):
        cov = build_latent_covariance(ArCovParams(cur.rho, cur.tau_sq), n)
        post = alpha_full_conditional(data, cur.beta, cur.sigma_sq, cov)
        alpha_tilde = sample_mv_normal(post.spec, rng)
        alpha = alpha_tilde[:t]

        prop = _propose(data, alpha, cur, prior, rng)
        log_u = math.log(rng.uniform())
        if prop is None:
            inadmissible_run += 1
            if inadmissible_run > MAX_INADMISSIBLE_RUN:
                raise DivergenceError(
                    f"no admissible proposal in {MAX_INADMISSIBLE_RUN} consecutive iterations (iteration {it})",
                    last_state=cur.scalars(),
                )
        else:
            inadmissible_run = 0
            log_r = log_acceptance_ratio(data, alpha, cur, prop, prior)
            if math.isnan(log_r):
                log.warning("NaN acceptance ratio at iteration %d; proposal rejected", it)
            elif log_u < log_r:
                accepted += 1
                _extend_latent(alpha_tilde, t, prop.rho, prop.tau_sq, rng)
                cur = BtvcState(alpha_tilde, prop.beta, prop.sigma_sq, prop.rho, prop.tau_sq)
        cur = BtvcState(alpha_tilde, cur.beta, cur.sigma_sq, cur.rho, cur.tau_sq)
        _assert_admissible(cur, prior)

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            out_alpha[k] = alpha_tilde
            for name in SCALAR_PARAMS:
                out[name][k] = getattr(cur, name)
            k += 1

    draws = PosteriorDraws(out_alpha, t=t, acceptance_rate=accepted / cfg.iterations, **out)
    if len(draws) >= 4:
        draws.diagnostics = diagnostics(draws)
    return draws


def _assert_admissible(s: BtvcState, prior: PriorConfig) -> None:
    ok = (
        abs(s.rho) < 1.0
        and 0.0 < s.sigma_sq < prior.target_var
        and abs(s.beta) < beta_upper_bound(s.sigma_sq, prior.target_var) - BETA_BOUND_GUARD
        and s.tau_sq > 0.0
        and math.isfinite(s.tau_sq)
        and np.all(np.isfinite(s.alpha_tilde))
    )
    if not ok:
        raise AssertionError(f"inadmissible chain state: {s.scalars()}")


# ---------------------------------------------------------------------------
# Diagnostics


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def effective_sample_size(chain) -> float:
    """ESS from Geyer's initial monotone sequence estimator; NaN for a constant chain."""
    x = np.asarray(chain, dtype=float)
    n = x.shape[0]
    if n < 4:
        raise ParameterError(f"need at least 4 draws for an ESS estimate, got {n}")
    if not np.var(x) > 0.0:
        return math.nan
    rho = _autocorr(x)
    n_pairs = n // 2
    gamma = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    total = 0.0
    prev = math.inf
    for g in gamma:
        if g <= 0.0:
            break
        g = min(g, prev)
        total += g
        prev = g
    tau = -1.0 + 2.0 * total
    return n / max(tau, 1.0 / math.log10(n)) if tau > 0 else float(n)


def split_rhat(chains) -> float:
    """Split potential scale reduction over one or more equal-length chains."""
    c = np.atleast_2d(np.asarray(chains, dtype=float))
    half = c.shape[1] // 2
    if half < 2:
        raise ParameterError("need at least 4 draws per chain for split R-hat")
    parts = np.concatenate([c[:, :half], c[:, half : 2 * half]], axis=0)
    n = parts.shape[1]
    w = parts.var(axis=1, ddof=1).mean()
    b = n * parts.mean(axis=1).var(ddof=1)
    if not w > 0.0:
        return math.nan if b > 0.0 else 1.0
    var_plus = (n - 1) / n * w + b / n
    return math.sqrt(var_plus / w)


def diagnostics(draws: PosteriorDraws) -> dict:
    """Per scalar parameter: ESS, split R-hat and a flag for degenerate chains."""
    if len(draws) < 4:
        raise ParameterError(f"need at least 4 retained draws for diagnostics, got {len(draws)}")
    report = {"acceptance_rate": draws.acceptance_rate, "n_draws": len(draws)}
    for name in SCALAR_PARAMS:
        x = draws.scalar(name)
        ess = effective_sample_size(x)
        report[name] = {
            "mean": float(np.mean(x)),
            "sd": float(np.std(x, ddof=1)),
            "ess": ess,
            "split_rhat": split_rhat(x),
            "degenerate": math.isnan(ess),
        }
    return report
