"""Yield panels, principal-component factors, OLS AR(1) baselines and
yield-curve reconstruction from factor forecasts."""

from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError

_DATE_RE = re.compile(r"^\d{4}-\d{2}(-\d{2})?$")
_MAT_RE = re.compile(r"^m(\d+(?:\.\d+)?)$")


@dataclass(frozen=True)
class YieldPanel:
    """Monthly yield curves: ``rates[i, j]`` is the rate (percentage points)
    at ``dates[i]`` for maturity ``maturities[j]`` (years)."""

    dates: tuple[str, ...]
    maturities: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.maturities, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "rates", rates)
        if rates.ndim != 2 or rates.shape != (len(self.dates), mats.size):
            raise ParameterError(f"rates shape {rates.shape} does not match {len(self.dates)} dates x {mats.size} maturities")
        if np.any(np.diff(mats) <= 0):
            raise ParameterError("maturities must be strictly increasing")
        if not np.all(np.isfinite(rates)):
            raise ParameterError("panel has missing or non-finite cells")

    @property
    def n_obs(self) -> int:
        return self.rates.shape[0]

    def maturity_index(self, maturity: float) -> int:
        hits = np.flatnonzero(np.isclose(self.maturities, maturity))
        if hits.size == 0:
            raise ParameterError(f"maturity {maturity} not in panel {self.maturities.tolist()}")
        return int(hits[0])

    def head(self, n: int) -> "YieldPanel":
        return YieldPanel(self.dates[:n], self.maturities, self.rates[:n])


def _fmt_maturity(m: float) -> str:
    return f"m{int(m)}" if float(m).is_integer() else f"m{m:g}"


def read_table_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Read a ``date,<col>,...`` CSV. Returns (header columns, dates, values).

    Ragged rows, bad dates and non-numeric cells raise :class:`InputError`
    naming the offending line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    if not header or header[0].strip() != "date" or len(header) < 2:
        raise InputError(f"{path}, line 1: header must start with 'date' followed by value columns")
    cols = [h.strip() for h in header[1:]]
    dates, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        date = row[0].strip()
        if not _DATE_RE.match(date):
            raise InputError(f"{path}, line {lineno}: bad date {date!r} (want YYYY-MM)")
        if dates and date[:7] <= dates[-1]:
            raise InputError(f"{path}, line {lineno}: date {date[:7]} does not follow {dates[-1]}")
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise InputError(f"{path}, line {lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}, line {lineno}: missing or non-finite value")
        dates.append(date[:7])
        rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return cols, dates, np.array(rows)


def read_panel_csv(path) -> YieldPanel:
    cols, dates, values = read_table_csv(path)
    mats = []
    for c in cols:
        m = _MAT_RE.match(c)
        if not m:
            raise InputError(f"{path}, line 1: column {c!r} is not a maturity like 'm10'")
        mats.append(float(m.group(1)))
    try:
        return YieldPanel(dates, np.array(mats), values)
    except ParameterError as exc:
        raise InputError(f"{path}: {exc}") from exc


def format_float(v: float) -> str:
    """Shortest repr that round-trips; identical on every IEEE-754 platform."""
    return repr(float(v))


def write_panel_csv(panel: YieldPanel, path, decimals: int | None = 6) -> None:
    fmt = (lambda v: f"{v:.{decimals}f}") if decimals is not None else format_float
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + [_fmt_maturity(m) for m in panel.maturities])
        for d, row in zip(panel.dates, panel.rates):
            w.writerow([d] + [fmt(v) for v in row])


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaDecomposition:
    mean: np.ndarray  # (M,) average curve
    loadings: np.ndarray  # (M, K), orthonormal columns
    scores: np.ndarray  # (T, K)
    explained_ratio: np.ndarray  # (K,)
    eigenvalues: np.ndarray  # (K,)

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    def transform(self, rates) -> np.ndarray:
        return (np.asarray(rates, dtype=float) - self.mean) @ self.loadings

    def reconstruct(self, scores) -> np.ndarray:
        """mean + scores @ loadings^T for any leading block of components."""
        s = np.asarray(scores, dtype=float)
        k = s.shape[-1]
        return self.mean + s @ self.loadings[:, :k].T


def pca(panel: YieldPanel | np.ndarray, n_components: int) -> PcaDecomposition:
    """Covariance PCA on the centered, unscaled rates.

    Loadings are sorted by decreasing eigenvalue and each column is signed so
    that its entry at the longest maturity is non-negative.
    """
    x = panel.rates if isinstance(panel, YieldPanel) else np.asarray(panel, dtype=float)
    t, m = x.shape
    if not 1 <= n_components <= min(t - 1, m):
        raise ParameterError(f"need 1 <= K <= min(T-1, M) = {min(t - 1, m)}, got {n_components}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (t - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    total = float(np.sum(np.clip(evals, 0.0, None)))
    load = evecs[:, :n_components].copy()
    signs = np.where(load[-1] < 0.0, -1.0, 1.0)
    load *= signs
    kept = evals[:n_components]
    if total > 0.0 and np.any(kept <= 1e-12 * total):
        warnings.warn("panel is rank deficient within the requested components", RuntimeWarning, stacklevel=2)
    ratio = np.clip(kept, 0.0, None) / total if total > 0.0 else np.zeros(n_components)
    return PcaDecomposition(mean, load, xc @ load, ratio, kept)


def reconstruct_curve(decomp: PcaDecomposition, level, slope) -> np.ndarray:
    """mean(tau) + loading_1(tau) * level + loading_2(tau) * slope.

    ``level`` and ``slope`` may be arrays of equal shape; the result then has
    a trailing maturity axis.
    """
    if decomp.n_components < 2:
        raise ParameterError("curve reconstruction needs at least two components")
    lv = np.asarray(level, dtype=float)[..., None]
    sl = np.asarray(slope, dtype=float)[..., None]
    return decomp.mean + lv * decomp.loadings[:, 0] + sl * decomp.loadings[:, 1]


# ---------------------------------------------------------------------------
# OLS AR(1)


@dataclass(frozen=True)
class Ar1Fit:
    """x_t = const + slope * x_{t-1} + e_t with Var(e) = resid_var."""

    const: float
    slope: float
    resid_var: float
    n_params: int = 2

    def forecast(self, last: float, h) -> np.ndarray:
        """Iterated conditional mean h steps ahead (h may be an array)."""
        h = np.asarray(h)
        g = self.slope**h
        if math.isclose(self.slope, 1.0):
            return last + self.const * h
        return self.const * (1.0 - g) / (1.0 - self.slope) + g * last

    @property
    def long_run_mean(self) -> float:
        return self.const / (1.0 - self.slope) if abs(self.slope) < 1.0 else math.nan

    @property
    def long_run_variance(self) -> float:
        """sigma^2 / (1 - gamma^2); infinite when the fit is not stationary."""
        return self.resid_var / (1.0 - self.slope**2) if abs(self.slope) < 1.0 else math.inf


def fit_ols_ar1(series, fix_constant_zero: bool = False) -> Ar1Fit:
    """OLS of x_t on (1, x_{t-1}), or on x_{t-1} alone. Residual variance uses RSS / (n - p)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ParameterError(f"need a series of length >= 3, got shape {x.shape}")
    y, z = x[1:], x[:-1]
    n = y.size
    if fix_constant_zero:
        sxx = float(z @ z)
        if not sxx > 0.0:
            raise ParameterError("lagged regressor is identically zero")
        slope, const, p = float(z @ y) / sxx, 0.0, 1
    else:
        zc = z - z.mean()
        sxx = float(zc @ zc)
        if sxx <= 1e-24 * max(1.0, float(z @ z)):
            raise ParameterError("lagged regressor has zero variance")
        slope = float(zc @ (y - y.mean())) / sxx
        const, p = float(y.mean() - slope * z.mean()), 2
    if n <= p:
        raise ParameterError("not enough observations for the residual variance")
    resid = y - const - slope * z
    return Ar1Fit(const, slope, max(float(resid @ resid) / (n - p), 0.0), p)


def forecast_dns(fits, last_values, horizons) -> np.ndarray:
    """Per-factor AR(1) mean forecasts, shape (len(horizons), n_factors)."""
    h = np.asarray(horizons)
    return np.column_stack([f.forecast(v, h) for f, v in zip(fits, last_values)])
