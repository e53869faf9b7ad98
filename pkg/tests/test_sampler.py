import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

from btvc.conditionals import beta_prior
from btvc.distributions import InvGammaParams, sample_inv_gamma, sample_mv_normal, sample_trunc_normal
from btvc.errors import DivergenceError, ParameterError
from btvc.latent_cov import BETA_BOUND_GUARD, ArCovParams, beta_upper_bound, build_latent_covariance, solve_tau_sq
from btvc.model import BtvcData, BtvcState, PriorConfig
from btvc.sampler import (
    SamplerConfig,
    diagnostics,
    effective_sample_size,
    initial_state,
    log_acceptance_ratio,
    run_chain,
    split_rhat,
)
from btvc.simulate import TrueParams, simulate_btvc


@pytest.fixture(scope="module")
def synthetic():
    x, _ = simulate_btvc(TrueParams(), 121, np.random.default_rng(2024))
    return BtvcData(x)


def test_config_validation_and_counts():
    assert SamplerConfig(iterations=10, burn_in=3, thinning=2).n_retained == 4
    assert SamplerConfig(iterations=10_000, burn_in=2_000).n_retained == 8_000
    for kw in (dict(iterations=0), dict(iterations=5, burn_in=5), dict(thinning=0), dict(horizon=-1), dict(seed=-1)):
        with pytest.raises(ParameterError):
            SamplerConfig(**kw)


def test_same_seed_is_bit_identical(synthetic):
    cfg = SamplerConfig(iterations=300, burn_in=100, thinning=2, seed=77, horizon=5)
    a, b = run_chain(synthetic, cfg), run_chain(synthetic, cfg)
    for name in ("alpha_tilde", "beta", "sigma_sq", "rho", "tau_sq"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.acceptance_rate == b.acceptance_rate
    c = run_chain(synthetic, SamplerConfig(iterations=300, burn_in=100, thinning=2, seed=78, horizon=5))
    assert not np.array_equal(a.beta, c.beta)


def test_retained_states_are_admissible(synthetic):
    prior = PriorConfig()
    draws = run_chain(synthetic, SamplerConfig(iterations=1500, burn_in=500, thinning=3, seed=1, horizon=12))
    assert len(draws) == 334
    assert draws.alpha_tilde.shape == (334, synthetic.t + 12)
    assert 0.05 < draws.acceptance_rate < 0.99
    for m in range(0, len(draws), 37):
        s = draws.state(m)
        assert s.tau_sq == pytest.approx(solve_tau_sq(s.rho, s.beta, s.sigma_sq, prior.target_var), rel=1e-12)
        assert abs(s.rho) < 1 and 0 < s.sigma_sq < prior.target_var
        assert np.all(np.isfinite(s.alpha_tilde))


def test_identical_proposal_has_unit_acceptance(synthetic):
    cfg = SamplerConfig(horizon=3)
    s = initial_state(synthetic, cfg)
    alpha = np.random.default_rng(0).normal(scale=0.1, size=synthetic.t)
    assert log_acceptance_ratio(synthetic, alpha, s, s, cfg.prior) == 0.0


def test_initial_state_starts_at_prior_means(synthetic):
    s = initial_state(synthetic, SamplerConfig(horizon=4))
    assert s.beta == 0.95 and s.rho == 0.98
    assert s.alpha_tilde.shape == (synthetic.t + 4,) and not s.alpha_tilde.any()
    assert s.tau_sq == solve_tau_sq(s.rho, s.beta, s.sigma_sq, 120.0)


def test_divergence_when_no_proposal_is_admissible():
    # Residual scale of order 1e3 against a target variance of 1e-3: every sigma^2 proposal is too large.
    x = np.array([0.0, 3000.0, -2000.0, 2500.0, -3100.0, 1800.0])
    with pytest.raises(DivergenceError) as err:
        run_chain(BtvcData(x), SamplerConfig(iterations=20_000, burn_in=0, prior=PriorConfig(target_var=1e-3)))
    assert set(err.value.last_state) >= {"beta", "sigma_sq", "rho", "tau_sq"}


def _prior_predictive_state(rng, prior: PriorConfig, t: int):
    rho = sample_trunc_normal(prior.rho_prior(), rng)
    while True:
        sigma_sq = sample_inv_gamma(InvGammaParams(prior.a, prior.b), rng)
        if sigma_sq < 0.9 * prior.target_var:
            break
    # The joint prior is restricted to the admissible set |beta| < upper bound.
    while True:
        beta = sample_trunc_normal(beta_prior(prior, sigma_sq), rng)
        if abs(beta) < beta_upper_bound(sigma_sq, prior.target_var) - 2 * BETA_BOUND_GUARD:
            break
    tau_sq = solve_tau_sq(rho, beta, sigma_sq, prior.target_var)
    alpha = sample_mv_normal(build_latent_covariance(ArCovParams(rho, tau_sq), t).mvn(), rng)
    x = np.zeros(t + 1)
    x[0] = rng.normal(scale=math.sqrt(prior.target_var))
    x[1:] = lfilter([1.0], [1.0, -beta], alpha + rng.normal(scale=math.sqrt(sigma_sq), size=t), zi=[beta * x[0]])[0]
    return BtvcData(x), BtvcState(alpha, beta, sigma_sq, rho, tau_sq)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_one_step_from_prior_predictive_stays_admissible(seed):
    rng = np.random.default_rng(seed)
    prior = PriorConfig(mu_beta=0.6, sigma_beta=0.3, mu_rho=0.7, sigma_rho=0.2, target_var=30.0)
    data, state = _prior_predictive_state(rng, prior, 20)
    draws = run_chain(data, SamplerConfig(iterations=2, burn_in=0, seed=seed, prior=prior), init=state)
    for m in range(len(draws)):
        s = draws.state(m)
        assert s.tau_sq == pytest.approx(solve_tau_sq(s.rho, s.beta, s.sigma_sq, prior.target_var), rel=1e-12)
        assert np.all(np.isfinite(s.alpha_tilde))


# --- diagnostics -------------------------------------------------------------


def test_ess_of_iid_chain():
    x = np.random.default_rng(3).standard_normal(1000)
    assert 800 <= effective_sample_size(x) <= 1200


def test_ess_of_ar1_chain_matches_integrated_autocorrelation():
    phi, n = 0.5, 40_000
    x = lfilter([1.0], [1.0, -phi], np.random.default_rng(4).standard_normal(n))
    assert effective_sample_size(x) == pytest.approx(n * (1 - phi) / (1 + phi), rel=0.1)


def test_constant_chain_is_flagged():
    assert math.isnan(effective_sample_size(np.full(100, 0.3)))


def test_split_rhat():
    x = np.random.default_rng(5).standard_normal(2000)
    assert split_rhat(np.concatenate([x[:1000], x[:1000]])) == pytest.approx(1.0, abs=0.01)
    shifted = np.concatenate([x[:1000], x[1000:] + 3.0])
    assert split_rhat(shifted) > 1.1


def test_diagnostics_report(synthetic):
    draws = run_chain(synthetic, SamplerConfig(iterations=400, burn_in=100, seed=9))
    rep = diagnostics(draws)
    assert rep["n_draws"] == 300
    for name in ("beta", "sigma_sq", "rho", "tau_sq"):
        assert set(rep[name]) == {"mean", "sd", "ess", "split_rhat", "degenerate"}
    with pytest.raises(ParameterError):
        diagnostics(run_chain(synthetic, SamplerConfig(iterations=3, burn_in=1)))
