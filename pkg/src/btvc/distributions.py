"""Sampling and densities for the truncated normal, inverse gamma and
multivariate normal distributions.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from . import _banded
from .errors import NumericError, ParameterError

_LOG_2PI = math.log(2.0 * math.pi)
# Below this normal mass the inverse-CDF method loses too many digits.
TAIL_MASS = 1e-10


@dataclass(frozen=True)
class TruncNormalParams:
    """Normal(mean, variance) restricted to the open interval (lower, upper)."""

    mean: float
    variance: float
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not (self.variance > 0.0) or not math.isfinite(self.variance):
            raise ParameterError(f"variance must be positive and finite, got {self.variance}")
        if not math.isfinite(self.mean):
            raise ParameterError(f"mean must be finite, got {self.mean}")
        if not self.lower < self.upper:
            raise ParameterError(f"need lower < upper, got ({self.lower}, {self.upper})")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def standardized_bounds(self) -> tuple[float, float]:
        return (self.lower - self.mean) / self.sd, (self.upper - self.mean) / self.sd


@dataclass(frozen=True)
class InvGammaParams:
    """Inverse gamma with density proportional to x^(-shape-1) exp(-scale/x)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise ParameterError(
                f"inverse gamma needs shape > 0 and scale > 0, got ({self.shape}, {self.scale})"
            )

    @property
    def mean(self) -> float:
        return self.scale / (self.shape - 1.0) if self.shape > 1.0 else math.inf


@dataclass(frozen=True)
class MvNormalSpec:
    """Multivariate normal given by its mean and either precision or covariance.

    With ``bandwidth`` set, ``matrix`` must be a precision matrix in lower band
    storage of shape ``(bandwidth + 1, n)`` with ``matrix[k, i] = Q[i, i - k]``.
    Otherwise ``matrix`` is a dense symmetric ``(n, n)`` array.
    """

    mean: np.ndarray
    matrix: np.ndarray
    is_precision: bool = False
    bandwidth: int | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "matrix", matrix)
        n = mean.shape[0]
        if self.bandwidth is not None:
            if not self.is_precision:
                raise ParameterError("banded storage is only supported for precision matrices")
            if matrix.shape != (self.bandwidth + 1, n):
                raise ParameterError(
                    f"banded precision must have shape {(self.bandwidth + 1, n)}, got {matrix.shape}"
                )
        elif matrix.shape != (n, n):
            raise ParameterError(f"matrix must be {n}x{n}, got {matrix.shape}")

    @classmethod
    def from_dense_banded(cls, mean, precision, bandwidth: int) -> "MvNormalSpec":
        """Build the banded form from a dense precision whose outer entries are exactly zero."""
        q = np.asarray(precision, dtype=float)
        n = q.shape[0]
        i, j = np.indices(q.shape)
        if np.any(q[np.abs(i - j) > bandwidth] != 0.0):
            raise ParameterError(f"precision has nonzero entries outside bandwidth {bandwidth}")
        ab = np.zeros((bandwidth + 1, n))
        for k in range(bandwidth + 1):
            ab[k, k:] = np.diagonal(q, offset=-k)
        return cls(mean, ab, is_precision=True, bandwidth=bandwidth)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def dense(self) -> np.ndarray:
        """The stored matrix as a dense array (precision or covariance, as tagged)."""
        if self.bandwidth is None:
            return self.matrix
        n = self.dim
        q = np.zeros((n, n))
        for k in range(self.bandwidth + 1):
            idx = np.arange(k, n)
            q[idx, idx - k] = self.matrix[k, k:]
            q[idx - k, idx] = self.matrix[k, k:]
        return q

    @cached_property
    def ldl(self) -> tuple[np.ndarray, np.ndarray]:
        """Banded LDL^T factors of the precision. Raises on a non-positive pivot."""
        lb, d, bad = _banded.ldl_banded(self.matrix)
        if bad >= 0:
            raise NumericError(f"precision not positive definite: pivot {bad} is not positive", pivot=int(bad))
        return lb, d

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Dense lower Cholesky factor of the stored matrix."""
        try:
            return np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError:
            raise NumericError(
                f"matrix not positive definite: pivot {_first_bad_pivot(self.matrix)} is not positive",
                pivot=_first_bad_pivot(self.matrix),
            ) from None

    def precision_solve(self, b: np.ndarray) -> np.ndarray:
        """Q^{-1} b for a banded precision Q."""
        lb, d = self.ldl
        return _banded.backward_unit_t(lb, _banded.forward_unit(lb, np.asarray(b, dtype=float)) / d)


def _first_bad_pivot(a: np.ndarray) -> int:
    """Index of the first non-positive pivot of an unpivoted LDL^T of ``a``."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for k in range(n):
        if not a[k, k] > 0.0:
            return k
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :]) / a[k, k]
    return n


# ---------------------------------------------------------------------------
# Truncated normal


def _log_mass(alpha: float, beta: float) -> float:
    """log(Phi(beta) - Phi(alpha)) without cancellation in either tail."""
    if alpha >= 0.0:
        hi, lo = special.log_ndtr(-alpha), special.log_ndtr(-beta)
    elif beta <= 0.0:
        hi, lo = special.log_ndtr(beta), special.log_ndtr(alpha)
    else:
        return math.log1p(-special.ndtr(alpha) - special.ndtr(-beta))
    if lo == -math.inf:
        return float(hi)
    return float(hi + math.log1p(-math.exp(lo - hi)))


def _tail_rejection(alpha: float, beta: float, rng: np.random.Generator) -> float:
    """Standard normal on (alpha, beta) with 0 <= alpha, by rejection (Robert, 1995)."""
    lam = 0.5 * (alpha + math.sqrt(alpha * alpha + 4.0))
    # A uniform proposal wins when the interval is short relative to the tail scale.
    use_uniform = (beta - alpha) < 2.0 * math.sqrt(math.e) / (alpha + math.sqrt(alpha * alpha + 4.0)) * math.exp(
        0.25 * (alpha * alpha - alpha * math.sqrt(alpha * alpha + 4.0))
    )
    while True:
        if use_uniform:
            z = rng.uniform(alpha, beta)
            log_acc = 0.5 * (alpha * alpha - z * z)
        else:
            z = alpha + rng.exponential(1.0 / lam)
            if z >= beta:
                continue
            log_acc = -0.5 * (z - lam) ** 2
        if math.log(rng.uniform()) < log_acc and alpha < z < beta:
            return z


def _std_trunc_normal(alpha: float, beta: float, rng: np.random.Generator) -> float:
    if beta <= 0.0:
        return -_std_trunc_normal(-beta, -alpha, rng)
    if _log_mass(alpha, beta) < math.log(TAIL_MASS):
        return _tail_rejection(alpha, beta, rng)
    while True:
        u = rng.uniform()
        if alpha >= 0.0:
            sa, sb = special.ndtr(-alpha), special.ndtr(-beta)
            z = -special.ndtri(sa - u * (sa - sb))
        else:
            pa, pb = special.ndtr(alpha), special.ndtr(beta)
            z = special.ndtri(pa + u * (pb - pa))
        if alpha < z < beta:
            return float(z)


def sample_trunc_normal(p: TruncNormalParams, rng: np.random.Generator) -> float:
    """One draw from the truncated normal, strictly inside ``(lower, upper)``."""
    alpha, beta = p.standardized_bounds()
    while True:
        x = p.mean + p.sd * _std_trunc_normal(alpha, beta, rng)
        # Rescaling can round onto a bound when the interval is tight.
        if p.lower < x < p.upper:
            return x


def logpdf_trunc_normal(p: TruncNormalParams, x: float) -> float:
    """Log density including the truncation normalizer; -inf outside the interval."""
    if not p.lower < x < p.upper:
        return -math.inf
    alpha, beta = p.standardized_bounds()
    z = (x - p.mean) / p.sd
    return -0.5 * z * z - 0.5 * _LOG_2PI - math.log(p.sd) - _log_mass(alpha, beta)


# ---------------------------------------------------------------------------
# Inverse gamma


def sample_inv_gamma(p: InvGammaParams, rng: np.random.Generator) -> float:
    while True:
        g = rng.gamma(p.shape, 1.0)
        if g > 0.0:
            return p.scale / g


def logpdf_inv_gamma(p: InvGammaParams, x: float) -> float:
    if not x > 0.0:
        return -math.inf
    return p.shape * math.log(p.scale) - special.gammaln(p.shape) - (p.shape + 1.0) * math.log(x) - p.scale / x


# ---------------------------------------------------------------------------
# Multivariate normal


def mv_normal_from_standard(spec: MvNormalSpec, z: np.ndarray) -> np.ndarray:
    """Map a vector of independent standard normals to a draw from ``spec``.

    Banded precision: solve L^T y = D^{-1/2} z. Dense precision: solve
    C^T y = z with Q = C C^T. Covariance: y = C z with Sigma = C C^T. The two
    precision routes give identical output for identical ``z``.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != spec.mean.shape:
        raise ParameterError(f"standard-normal input has shape {z.shape}, expected {spec.mean.shape}")
    if spec.bandwidth is not None:
        lb, d = spec.ldl
        return spec.mean + _banded.backward_unit_t(lb, z / np.sqrt(d))
    c = spec.cholesky
    if spec.is_precision:
        return spec.mean + solve_triangular(c, z, lower=True, trans="T")
    return spec.mean + c @ z


def sample_mv_normal(spec: MvNormalSpec, rng: np.random.Generator) -> np.ndarray:
    return mv_normal_from_standard(spec, rng.standard_normal(spec.dim))


def logpdf_mv_normal(spec: MvNormalSpec, x) -> float:
    """Exact log density, normalizing constant included."""
    x = np.asarray(x, dtype=float)
    if x.shape != spec.mean.shape:
        raise ParameterError(f"x has shape {x.shape}, expected {spec.mean.shape}")
    r = x - spec.mean
    n = spec.dim
    if spec.bandwidth is not None:
        lb, d = spec.ldl
        quad = _banded.quad_form_ldl(lb, d, r)
        logdet_prec = float(np.sum(np.log(d)))
    else:
        c = spec.cholesky
        logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
        if spec.is_precision:
            u = c.T @ r
            logdet_prec = logdet
        else:
            u = solve_triangular(c, r, lower=True)
            logdet_prec = -logdet
        quad = float(u @ u)
    return 0.5 * logdet_prec - 0.5 * quad - 0.5 * n * _LOG_2PI
