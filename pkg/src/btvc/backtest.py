"""Expanding-window out-of-sample evaluation of yield-curve factor models.

At every origin the models are refit on all months up to and including the
origin, curves are forecast for each horizon and compared with the realized
curve. Errors are realized minus forecast.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BtvcError, ParameterError
from .factors import PcaDecomposition, YieldPanel, fit_ols_ar1, pca, reconstruct_curve
from .forecast import point_forecast, simulate_paths
from .model import BtvcData, PriorConfig
from .sampler import SamplerConfig, run_chain
from .seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

MODEL_NAMES = ("btvc", "dns", "ar1", "ar1-restricted")
MODEL_TITLES = {
    "btvc": "The BTVC-AR(1)-Factor model",
    "dns": "The dynamic Nelson-Siegel model",
    "ar1": "The AR(1)-Factor model",
    "ar1-restricted": "The restricted AR(1)-Factor model",
}


@dataclass(frozen=True)
class BacktestConfig:
    initial_window: int = 120
    horizons: tuple[int, ...] = (1, 3, 6, 12)
    report_maturities: tuple[float, ...] = (1.0, 3.0, 5.0, 10.0)
    end_buffer: int = 12
    refit_pca: bool = True
    iterations: int = 4000
    burn_in: int = 1000
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "report_maturities", tuple(float(m) for m in self.report_maturities))
        if not self.horizons or min(self.horizons) < 1:
            raise ParameterError(f"horizons must be positive, got {self.horizons}")
        if self.end_buffer < max(self.horizons):
            raise ParameterError(f"end_buffer {self.end_buffer} is shorter than the longest horizon")
        if self.initial_window < 3:
            raise ParameterError("initial_window must be at least 3")

    def n_origins(self, n_obs: int) -> int:
        return n_obs - self.initial_window - self.end_buffer

    def to_dict(self) -> dict:
        d = asdict(self)
        d["horizons"] = list(self.horizons)
        d["report_maturities"] = list(self.report_maturities)
        return d


# A curve model maps (training rates, horizons, seed context) to forecast curves
# of shape (len(horizons), n_maturities).
CurveModel = Callable[["OriginContext"], np.ndarray]


@dataclass(frozen=True)
class OriginContext:
    """Everything a model may use at one origin."""

    rates: np.ndarray  # (n, M) training window
    horizons: tuple[int, ...]
    decomp: PcaDecomposition
    seed: int
    config: BacktestConfig

    @property
    def n(self) -> int:
        return self.rates.shape[0]


def _level_slope(ctx: OriginContext) -> tuple[np.ndarray, np.ndarray]:
    scores = ctx.decomp.transform(ctx.rates)
    return scores[:, 0], scores[:, 1]


def _ar1_factor_model(level_const: bool, slope_const: bool) -> CurveModel:
    def model(ctx: OriginContext) -> np.ndarray:
        level, slope = _level_slope(ctx)
        h = np.asarray(ctx.horizons)
        lf = fit_ols_ar1(level, fix_constant_zero=not level_const).forecast(level[-1], h)
        sf = fit_ols_ar1(slope, fix_constant_zero=not slope_const).forecast(slope[-1], h)
        return reconstruct_curve(ctx.decomp, lf, sf)

    return model


def btvc_factor_model(ctx: OriginContext) -> np.ndarray:
    """BTVC-AR(1) on the level score (point forecast = mean of simulated paths),
    zero-constant OLS AR(1) on the slope score."""
    level, slope = _level_slope(ctx)
    cfg = ctx.config
    hmax = max(ctx.horizons)
    scfg = SamplerConfig(
        iterations=cfg.iterations, burn_in=cfg.burn_in, seed=derive_seed(ctx.seed, "chain"), horizon=hmax, prior=cfg.prior
    )
    data = BtvcData(level)
    draws = run_chain(data, scfg)
    paths = simulate_paths(draws, data, derive_rng(ctx.seed, "paths"))
    lf = point_forecast(paths)[np.asarray(ctx.horizons) - 1]
    sf = fit_ols_ar1(slope, fix_constant_zero=True).forecast(slope[-1], np.asarray(ctx.horizons))
    return reconstruct_curve(ctx.decomp, lf, sf)


def standard_models(names: Sequence[str] = MODEL_NAMES) -> dict[str, CurveModel]:
    table = {
        "btvc": btvc_factor_model,
        "dns": _ar1_factor_model(level_const=True, slope_const=True),
        "ar1": _ar1_factor_model(level_const=True, slope_const=False),
        "ar1-restricted": _ar1_factor_model(level_const=False, slope_const=False),
    }
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ParameterError(f"unknown model(s) {unknown}; choose from {list(table)}")
    return {n: table[n] for n in names}


# ---------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class CellStats:
    model: str
    horizon: int
    maturity: float
    n: int
    mean: float
    sd: float
    rmse: float


@dataclass
class BacktestReport:
    cells: list[CellStats]
    gaps: list[dict]
    n_origins: int
    config: dict
    fingerprint: str

    def cell(self, model: str, horizon: int, maturity: float) -> CellStats:
        for c in self.cells:
            if c.model == model and c.horizon == horizon and math.isclose(c.maturity, maturity):
                return c
        raise KeyError((model, horizon, maturity))

    def models(self) -> list[str]:
        seen: list[str] = []
        for c in self.cells:
            if c.model not in seen:
                seen.append(c.model)
        return seen


def error_stats(errors) -> tuple[int, float, float, float]:
    """(N, mean, sample SD with N-1, RMSE = sqrt(mean of squares))."""
    e = np.asarray(errors, dtype=float)
    n = e.size
    if n == 0:
        return 0, math.nan, math.nan, math.nan
    sd = float(np.std(e, ddof=1)) if n > 1 else 0.0
    return n, float(e.mean()), sd, float(np.sqrt(np.mean(e * e)))


def panel_fingerprint(panel: YieldPanel) -> str:
    h = hashlib.sha256()
    h.update(",".join(panel.dates).encode())
    h.update(np.ascontiguousarray(panel.maturities, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(panel.rates, dtype="<f8").tobytes())
    return h.hexdigest()


def run_backtest(
    panel: YieldPanel,
    models: dict[str, CurveModel] | Sequence[str],
    cfg: BacktestConfig,
    seed: int = 0,
) -> BacktestReport:
    """Expanding-window backtest.

    Training windows have lengths initial_window .. T - end_buffer - 1, so the
    number of origins is T - initial_window - end_buffer. A model that raises
    at an origin is recorded in ``gaps`` and that origin is excluded from its
    statistics.
    """
    if not isinstance(models, dict):
        models = standard_models(list(models))
    n_obs = panel.n_obs
    n_orig = cfg.n_origins(n_obs)
    if n_orig < 1:
        raise ParameterError(
            f"panel has {n_obs} months; need more than initial_window + end_buffer = "
            f"{cfg.initial_window + cfg.end_buffer}"
        )
    mat_idx = [panel.maturity_index(m) for m in cfg.report_maturities]
    fixed = pca(panel.rates[: cfg.initial_window], 2) if not cfg.refit_pca else None

    errors = {(name, h): [] for name in models for h in cfg.horizons}
    gaps: list[dict] = []
    for k in range(n_orig):
        n = cfg.initial_window + k
        window = panel.rates[:n]
        decomp = fixed if fixed is not None else pca(window, 2)
        for name, model in models.items():
            ctx = OriginContext(window, cfg.horizons, decomp, derive_seed(seed, "backtest", name, n), cfg)
            try:
                fc = np.asarray(model(ctx), dtype=float)
                if fc.shape != (len(cfg.horizons), panel.maturities.size) or not np.all(np.isfinite(fc)):
                    raise BtvcError(f"model returned invalid forecast of shape {fc.shape}")
            except (BtvcError, ArithmeticError, ValueError, AssertionError) as exc:
                log.warning("model %s failed at origin %s: %s", name, panel.dates[n - 1], exc)
                gaps.append({"model": name, "origin": panel.dates[n - 1], "error": f"{type(exc).__name__}: {exc}"})
                continue
            for hi, h in enumerate(cfg.horizons):
                actual = panel.rates[n - 1 + h, mat_idx]
                errors[(name, h)].append(actual - fc[hi, mat_idx])

    cells = []
    for name in models:
        for h in cfg.horizons:
            e = np.array(errors[(name, h)]).reshape(-1, len(mat_idx))
            for j, m in enumerate(cfg.report_maturities):
                cells.append(CellStats(name, h, m, *error_stats(e[:, j])))
    return BacktestReport(cells, gaps, n_orig, cfg.to_dict() | {"seed": seed}, panel_fingerprint(panel))


CSV_COLUMNS = ("model", "horizon", "maturity", "n", "mean", "sd", "rmse")


def _f4(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _maturity_label(m: float) -> str:
    return f"{int(m)}" if float(m).is_integer() else f"{m:g}"


def render_report(report: BacktestReport) -> tuple[str, str]:
    """(CSV text, aligned text tables). Numbers use fixed 4-decimal formatting."""
    if not report.cells:
        raise ParameterError("empty report")
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in report.cells:
        if c.n == 0:
            continue
        w.writerow([c.model, c.horizon, _maturity_label(c.maturity), c.n, _f4(c.mean), _f4(c.sd), _f4(c.rmse)])
    return out.getvalue(), render_text(report)


def render_text(report: BacktestReport) -> str:
    """One table per horizon: column header, double rule, model groups
    separated by blank lines, closing rule and caption underneath."""
    width = 44
    lines: list[str] = []
    for h in sorted({c.horizon for c in report.cells}):
        lines.append(f"{'Maturity':<12}{'Mean':>10}{'Std. Dev.':>12}{'RMSE':>10}")
        lines.append("=" * width)
        for model in report.models():
            rows = [c for c in report.cells if c.model == model and c.horizon == h and c.n > 0]
            if not rows:
                continue
            lines.append("")
            lines.append(MODEL_TITLES.get(model, model))
            for c in rows:
                label = f"{_maturity_label(c.maturity)} year"
                lines.append(f"{label:<12}{_f4(c.mean):>10}{_f4(c.sd):>12}{_f4(c.rmse):>10}")
        lines.append("-" * width)
        lines.append(f"Results of the out-of-sample {h}-month ahead forecasting.")
        lines.append("")
    if report.gaps:
        lines.append(f"Model failures excluded from the statistics: {len(report.gaps)}")
        for g in report.gaps:
            lines.append(f"  {g['model']} at {g['origin']}: {g['error']}")
        lines.append("")
    return "\n".join(lines)


def parse_report_csv(text: str) -> list[CellStats]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        CellStats(r["model"], int(r["horizon"]), float(r["maturity"]), int(r["n"]), float(r["mean"]), float(r["sd"]), float(r["rmse"]))
        for r in rows
    ]
