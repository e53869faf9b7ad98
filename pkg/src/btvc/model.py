"""Core value types shared by the conditionals, the sampler and the CLI."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import TruncNormalParams
from .errors import ParameterError


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the BTVC-AR(1) model.

    ``sigma_beta`` is multiplicative: the prior variance of beta given
    sigma^2 is ``sigma_sq * sigma_beta**2``. ``sigma_rho`` is a standard
    deviation. ``target_var`` is the long-run variance the model is forced to
    reach, in squared units of the modeled series. Defaults are the level-factor
    settings for German government yields (20 maturities, monthly).
    """

    mu_beta: float = 0.95
    sigma_beta: float = 0.015
    mu_rho: float = 0.98
    sigma_rho: float = 0.001
    a: float = 0.5
    b: float = 2.0
    target_var: float = 120.0
    theta: float = 0.0

    def __post_init__(self):
        for name in ("sigma_beta", "sigma_rho", "a", "b", "target_var"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ParameterError(f"prior.{name} must be positive and finite, got {v}")
        if self.theta != 0.0:
            raise ParameterError("only theta = 0 is supported; center the data instead")

    def rho_prior(self) -> TruncNormalParams:
        return TruncNormalParams(self.mu_rho, self.sigma_rho**2, -1.0, 1.0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BtvcData:
    """Observations x_0..x_t; x_0 is conditioned on."""

    x: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        if x.ndim != 1 or x.shape[0] < 3:
            raise ParameterError(f"need a 1-D series with at least 3 values, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ParameterError("series contains non-finite values")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def t(self) -> int:
        """Number of transitions (= number of latent values tied to data)."""
        return self.x.shape[0] - 1

    @property
    def current(self) -> np.ndarray:
        return self.x[1:]

    @property
    def lagged(self) -> np.ndarray:
        return self.x[:-1]


@dataclass(frozen=True)
class BtvcState:
    """One joint draw. ``alpha_tilde`` has length t + h."""

    alpha_tilde: np.ndarray
    beta: float
    sigma_sq: float
    rho: float
    tau_sq: float

    def scalars(self) -> dict[str, float]:
        return {"beta": self.beta, "sigma_sq": self.sigma_sq, "rho": self.rho, "tau_sq": self.tau_sq}
