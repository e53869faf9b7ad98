"""AR(1) structure of the latent intercept process and the long-run variance
constraint tying its innovation variance to the other parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import MvNormalSpec
from .errors import ConstraintError, ParameterError

# Reject beta this close to its admissible upper bound (tau^2 would underflow).
BETA_BOUND_GUARD = 1e-8


@dataclass(frozen=True)
class ArCovParams:
    rho: float
    tau_sq: float

    def __post_init__(self):
        if not abs(self.rho) < 1.0:
            raise ParameterError(f"latent process needs |rho| < 1, got {self.rho}")
        if not self.tau_sq > 0.0:
            raise ParameterError(f"tau_sq must be positive, got {self.tau_sq}")

    @property
    def stationary_variance(self) -> float:
        return self.tau_sq / (1.0 - self.rho * self.rho)


@dataclass(frozen=True)
class LatentCovariance:
    """Stationary AR(1) prior for n consecutive latent values, held as its
    tridiagonal precision.

    ``diag`` has length n and ``off`` length n - 1 (entry i couples i and i+1).
    """

    n: int
    diag: np.ndarray
    off: np.ndarray
    logdet_precision: float
    params: ArCovParams

    def banded(self) -> np.ndarray:
        """Lower band storage, shape (2, n)."""
        ab = np.zeros((2, self.n))
        ab[0] = self.diag
        ab[1, 1:] = self.off
        return ab

    def mvn(self) -> MvNormalSpec:
        return MvNormalSpec(np.zeros(self.n), self.banded(), is_precision=True, bandwidth=1)

    def dense_precision(self) -> np.ndarray:
        q = np.diag(self.diag)
        idx = np.arange(self.n - 1)
        q[idx + 1, idx] = self.off
        q[idx, idx + 1] = self.off
        return q

    def dense_covariance(self) -> np.ndarray:
        """Closed form tau^2 rho^|i-j| / (1 - rho^2); used for checks only."""
        lag = np.abs(np.subtract.outer(np.arange(self.n), np.arange(self.n)))
        return self.params.stationary_variance * self.params.rho ** lag


def build_latent_covariance(p: ArCovParams, n: int) -> LatentCovariance:
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rho, tau_sq = p.rho, p.tau_sq
    if n == 1:
        diag = np.array([(1.0 - rho * rho) / tau_sq])
    else:
        diag = np.full(n, (1.0 + rho * rho) / tau_sq)
        diag[0] = diag[-1] = 1.0 / tau_sq
    off = np.full(n - 1, -rho / tau_sq)
    logdet = math.log1p(-rho * rho) - n * math.log(tau_sq)
    return LatentCovariance(n, diag, off, logdet, p)


def beta_upper_bound(sigma_sq: float, target_var: float) -> float:
    """Largest beta that keeps the solved tau^2 positive."""
    if not 0.0 < sigma_sq < target_var:
        raise ConstraintError(f"need 0 < sigma_sq < target variance, got sigma_sq={sigma_sq}, V={target_var}")
    return math.sqrt((target_var - sigma_sq) / target_var)


def _check_stationary(rho: float, beta: float) -> None:
    if not abs(rho) < 1.0:
        raise ParameterError(f"need |rho| < 1, got {rho}")
    if not abs(beta) < 1.0:
        raise ParameterError(f"need |beta| < 1, got {beta}")


def long_run_variance(rho: float, beta: float, sigma_sq: float, tau_sq: float) -> float:
    """Unconditional variance of x when the intercept follows an AR(1) with (rho, tau_sq)."""
    _check_stationary(rho, beta)
    if not sigma_sq > 0.0 or tau_sq < 0.0:
        raise ParameterError(f"need sigma_sq > 0 and tau_sq >= 0, got ({sigma_sq}, {tau_sq})")
    rb = rho * beta
    one_b2 = 1.0 - beta * beta
    return sigma_sq / one_b2 + tau_sq * (1.0 + rb) / ((1.0 - rb) * one_b2 * (1.0 - rho * rho))


def solve_tau_sq(rho: float, beta: float, sigma_sq: float, target_var: float) -> float:
    """The tau^2 that makes the long-run variance equal ``target_var``."""
    if not abs(rho) < 1.0:
        raise ParameterError(f"need |rho| < 1, got {rho}")
    if not target_var > 0.0:
        raise ParameterError(f"target variance must be positive, got {target_var}")
    upper = beta_upper_bound(sigma_sq, target_var)
    # Below -upper the solved tau^2 is negative as well, although the prior
    # truncation for beta only starts at -1.
    if not -upper + BETA_BOUND_GUARD < beta < upper - BETA_BOUND_GUARD:
        raise ConstraintError(
            f"beta={beta} outside admissible interval (-{upper:.12g}, {upper:.12g}) "
            f"(guard {BETA_BOUND_GUARD:g}); upper bound is {upper:.12g}"
        )
    rb = rho * beta
    one_b2 = 1.0 - beta * beta
    return (target_var - sigma_sq / one_b2) * (1.0 - rb) * one_b2 * (1.0 - rho * rho) / (1.0 + rb)
