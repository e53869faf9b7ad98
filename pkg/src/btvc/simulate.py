"""Synthetic data from the BTVC-AR(1) generative model and synthetic yield
panels built from fixed level/slope loadings."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ConstraintError, ParameterError
from .factors import YieldPanel
from .latent_cov import solve_tau_sq


@dataclass(frozen=True)
class TrueParams:
    rho: float = 0.98
    beta: float = 0.95
    sigma_sq: float = 1.0
    target_var: float | None = 120.0
    tau_sq: float | None = None

    def resolved_tau_sq(self) -> float:
        """tau^2 given explicitly, or solved from the target variance."""
        if self.tau_sq is not None:
            if self.tau_sq < 0.0:
                raise ConstraintError(f"tau_sq must be >= 0, got {self.tau_sq}")
            if not (abs(self.rho) < 1.0 and abs(self.beta) < 1.0 and self.sigma_sq > 0.0):
                raise ConstraintError("need |rho| < 1, |beta| < 1 and sigma_sq > 0")
            return self.tau_sq
        if self.target_var is None:
            raise ParameterError("either tau_sq or target_var must be given")
        return solve_tau_sq(self.rho, self.beta, self.sigma_sq, self.target_var)


def simulate_btvc(
    params: TrueParams, n: int, rng: np.random.Generator, warmup: int = 10_000
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate x_0..x_{n-1} and the latent intercepts alpha_0..alpha_{n-1}.

    ``alpha[i]`` is the intercept that produced ``x[i]``. The first ``warmup``
    steps are discarded so the output starts close to stationarity.
    """
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    tau_sq = params.resolved_tau_sq()
    total = n + warmup
    eta = rng.standard_normal(total) * math.sqrt(tau_sq)
    eps = rng.standard_normal(total) * math.sqrt(params.sigma_sq)
    alpha = lfilter([1.0], [1.0, -params.rho], eta)
    x = lfilter([1.0], [1.0, -params.beta], alpha + eps)
    return x[warmup:], alpha[warmup:]


def default_loadings(maturities) -> np.ndarray:
    """Orthonormal level (flat) and slope (monotone, rising with maturity) columns."""
    m = np.asarray(maturities, dtype=float)
    level = np.ones_like(m)
    slope = 1.0 - np.exp(-m / 3.0)
    slope = slope - slope.mean()
    q, _ = np.linalg.qr(np.column_stack([level, slope]))
    # Fix signs so both columns end non-negative at the long end.
    return q * np.sign(q[-1])


def default_mean_curve(maturities) -> np.ndarray:
    m = np.asarray(maturities, dtype=float)
    return 1.5 + 2.5 * (1.0 - np.exp(-m / 4.0))


def monthly_dates(n: int, start: str = "1997-09") -> list[str]:
    year, month = (int(p) for p in start.split("-"))
    out = []
    for k in range(n):
        y, mth = divmod(month - 1 + k, 12)
        out.append(f"{year + y:04d}-{mth + 1:02d}")
    return out


def simulate_panel(
    params: TrueParams,
    n: int,
    rng: np.random.Generator,
    maturities=tuple(range(1, 21)),
    slope_gamma: float = 0.95,
    slope_sd: float = 0.3,
    noise_sd: float = 0.02,
    warmup: int = 10_000,
) -> tuple[YieldPanel, dict]:
    """Yield panel whose level score is a BTVC-AR(1) series and whose slope
    score is a zero-mean AR(1); rates = mean curve + loadings @ scores + noise."""
    mats = np.asarray(maturities, dtype=float)
    level, _ = simulate_btvc(params, n, rng, warmup)
    slope = lfilter([1.0], [1.0, -slope_gamma], rng.standard_normal(n + warmup) * slope_sd)[warmup:]
    load = default_loadings(mats)
    mu = default_mean_curve(mats)
    rates = mu + np.column_stack([level, slope]) @ load.T + noise_sd * rng.standard_normal((n, mats.size))
    panel = YieldPanel(monthly_dates(n), mats, rates)
    truth = {"level": level, "slope": slope, "loadings": load, "mean_curve": mu}
    return panel, truth
