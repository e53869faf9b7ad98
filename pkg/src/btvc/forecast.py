"""Predictive path simulation and horizon summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import BtvcData
from .sampler import PosteriorDraws

QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99)
FAN_COLUMNS = ("horizon", "mean", "sd", "q01", "q05", "q25", "q50", "q75", "q95", "q99")


@dataclass(frozen=True)
class ForecastPaths:
    """``paths[m, j - 1]`` is the simulated value j steps after the origin for posterior state m."""

    paths: np.ndarray
    origin: int
    last_value: float

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]


@dataclass(frozen=True)
class HorizonSummary:
    horizon: int
    mean: float
    sd: float
    quantiles: tuple[float, ...]  # at QUANTILE_LEVELS

    def row(self) -> list[float]:
        return [self.horizon, self.mean, self.sd, *self.quantiles]


def simulate_paths(
    draws: PosteriorDraws, data: BtvcData | np.ndarray, rng: np.random.Generator, horizon: int | None = None
) -> ForecastPaths:
    """One path per retained state: x_{t+j} = alpha_{t+j} + beta x_{t+j-1} + eps_{t+j}.

    Every path starts from the last observation. ``horizon`` defaults to the
    full latent extension stored in the draws.
    """
    x = data.x if isinstance(data, BtvcData) else np.asarray(data, dtype=float)
    h = draws.horizon if horizon is None else horizon
    if h < 1:
        raise ParameterError(f"forecast horizon must be >= 1, got {h}")
    if h > draws.horizon:
        raise ParameterError(
            f"horizon {h} exceeds the latent extension of the draws ({draws.horizon}); refit with a larger horizon"
        )
    if len(draws) == 0:
        raise ParameterError("no posterior draws")
    if x.shape[0] != draws.t + 1:
        raise ParameterError(f"data has {x.shape[0]} values but the draws were fit on {draws.t + 1}")
    out = paths_from_tail(draws.alpha_tail[:, :h], draws.beta, draws.sigma_sq, float(x[-1]), rng)
    return ForecastPaths(out, origin=draws.t, last_value=float(x[-1]))


def paths_from_tail(tail, beta, sigma_sq, last: float, rng: np.random.Generator) -> np.ndarray:
    """Run the recursion for every state from the latent tail alone.

    ``tail[m, j - 1]`` is alpha_{t+j} of state m. Used when only the persisted
    tail of a fit is available.
    """
    tail = np.asarray(tail, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if tail.ndim != 2 or tail.shape[1] < 1:
        raise ParameterError(f"latent tail must be a non-empty matrix, got shape {tail.shape}")
    eps = rng.standard_normal(tail.shape) * np.sqrt(np.asarray(sigma_sq, dtype=float))[:, None]
    out = np.empty_like(tail)
    prev = np.full(tail.shape[0], last)
    for j in range(tail.shape[1]):
        prev = tail[:, j] + beta * prev + eps[:, j]
        out[:, j] = prev
    return out


def point_forecast(paths: ForecastPaths | np.ndarray) -> np.ndarray:
    p = paths.paths if isinstance(paths, ForecastPaths) else np.asarray(paths, dtype=float)
    if p.shape[0] == 0:
        raise ParameterError("no paths")
    return p.mean(axis=0)


def summarize_horizon(paths: ForecastPaths | np.ndarray, j: int) -> HorizonSummary:
    """Mean, sample SD (ddof=1) and quantiles of the j-step-ahead values.

    Quantiles use linear interpolation between order statistics: with sorted
    values v_0..v_{n-1}, level q maps to position q * (n - 1).
    """
    p = paths.paths if isinstance(paths, ForecastPaths) else np.asarray(paths, dtype=float)
    if not 1 <= j <= p.shape[1]:
        raise ParameterError(f"horizon {j} outside 1..{p.shape[1]}")
    col = p[:, j - 1]
    q = np.quantile(col, QUANTILE_LEVELS, method="linear")
    # Interpolation can break monotonicity by an ulp when neighbours coincide.
    q = np.maximum.accumulate(q)
    sd = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
    return HorizonSummary(j, float(col.mean()), sd, tuple(float(v) for v in q))


def fan_chart(paths: ForecastPaths | np.ndarray, horizons=None, shift: float = 0.0) -> list[HorizonSummary]:
    """Summaries for each requested horizon (default all), with ``shift`` added
    back to every location statistic (used to undo centering)."""
    p = paths.paths if isinstance(paths, ForecastPaths) else np.asarray(paths, dtype=float)
    hs = range(1, p.shape[1] + 1) if horizons is None else horizons
    out = []
    for j in hs:
        s = summarize_horizon(p, j)
        out.append(HorizonSummary(j, s.mean + shift, s.sd, tuple(v + shift for v in s.quantiles)))
    return out


def write_fan_chart_csv(summaries, path, decimals: int = 6, extra: dict | None = None) -> None:
    """Columns ``horizon, mean, sd, q01 .. q99`` (optionally prefixed by ``extra`` constant columns)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*extra.keys(), *FAN_COLUMNS])
        for s in summaries:
            w.writerow([*extra.values(), s.horizon, *(f"{v:.{decimals}f}" for v in s.row()[1:])])


def mc_standard_error(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.std(v, ddof=1) / math.sqrt(v.size))
