"""Command-line interface: ``btvc {simulate,fit,forecast,backtest,pca,show-config}``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 malformed input or
configuration. Failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import MODEL_NAMES, render_report, run_backtest
from .config import RunConfig, dump_config, load_config
from .errors import BtvcError, InputError, ParameterError
from .factors import PcaDecomposition, YieldPanel, fit_ols_ar1, pca, read_panel_csv, read_table_csv, reconstruct_curve, write_panel_csv
from .forecast import FAN_COLUMNS, fan_chart, paths_from_tail, point_forecast, write_fan_chart_csv
from .model import BtvcData
from .sampler import SCALAR_PARAMS, SamplerConfig, diagnostics, run_chain
from .seeding import derive_rng, derive_seed
from .simulate import TrueParams, monthly_dates, simulate_btvc, simulate_panel

log = logging.getLogger("btvc")

DRAWS_FILE = "draws.csv"
FIT_SUMMARY_FILE = "fit_summary.json"


# ---------------------------------------------------------------------------
# helpers


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_manifest(out: Path, command: str, cfg: RunConfig, data_sha: str | None, outputs: list[str], extra=None) -> Path:
    manifest = {
        "tool": "btvc",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "data_sha256": data_sha,
        "outputs": {name: sha256_file(out / name) for name in outputs},
    }
    if extra:
        manifest.update(extra)
    path = out / f"manifest_{command}.json"
    write_json(manifest, path)
    return path


def load_input(path: Path) -> tuple[str, object]:
    """('panel', YieldPanel) for ``m<years>`` columns, ('series', (dates, x)) for one value column."""
    cols, dates, values = read_table_csv(path)
    if all(c.startswith("m") for c in cols) and len(cols) > 1:
        return "panel", read_panel_csv(path)
    if len(cols) == 1:
        return "series", (dates, values[:, 0])
    raise InputError(f"{path}, line 1: expected maturity columns like 'm1,m2,..' or a single value column")


def _series_from_input(kind: str, obj, cfg: RunConfig) -> tuple[np.ndarray, dict]:
    """The modeled series plus the metadata needed to map forecasts back."""
    if kind == "panel":
        decomp = pca(obj, 2)
        level, slope = decomp.scores[:, 0], decomp.scores[:, 1]
        sfit = fit_ols_ar1(slope, fix_constant_zero=True)
        meta = {
            "kind": "panel",
            "shift": 0.0,
            "pca": {
                "maturities": obj.maturities,
                "mean": decomp.mean,
                "loadings": decomp.loadings.T,
                "explained_ratio": decomp.explained_ratio,
            },
            "slope_fit": {"slope": sfit.slope, "resid_var": sfit.resid_var, "last": float(slope[-1])},
        }
        return level, meta
    _, x = obj
    shift = float(np.mean(x)) if cfg.data.center else 0.0
    return x - shift, {"kind": "series", "shift": shift}


# ---------------------------------------------------------------------------
# commands


def cmd_show_config(cfg: RunConfig, out: Path | None) -> int:
    sys.stdout.write(dump_config(cfg))
    return 0


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    s = cfg.simulate
    params = TrueParams(s.rho, s.beta, s.sigma_sq, s.target_var, s.tau_sq)
    tau_sq = params.resolved_tau_sq()
    rng = derive_rng(cfg.seed, "simulate")
    out.mkdir(parents=True, exist_ok=True)
    truth = {"rho": s.rho, "beta": s.beta, "sigma_sq": s.sigma_sq, "tau_sq": tau_sq, "target_var": s.target_var}
    if s.panel:
        panel, extra = simulate_panel(params, s.n_obs, rng, s.maturities, s.slope_gamma, s.slope_sd, s.noise_sd, s.warmup)
        panel = YieldPanel(monthly_dates(s.n_obs, s.start), panel.maturities, panel.rates)
        data_name = "panel.csv"
        write_panel_csv(panel, out / data_name)
        truth["mean_curve"] = extra["mean_curve"]
        truth["loadings"] = extra["loadings"].T
        factors = np.column_stack([extra["level"], extra["slope"]])
        header = ["date", "level", "slope"]
    else:
        x, alpha = simulate_btvc(params, s.n_obs, rng, s.warmup)
        data_name = "series.csv"
        _write_rows(out / data_name, ["date", "x"], monthly_dates(s.n_obs, s.start), x[:, None])
        factors = alpha[:, None]
        header = ["date", "alpha"]
    _write_rows(out / "truth.csv", header, monthly_dates(s.n_obs, s.start), factors)
    write_json(truth, out / "truth.json")
    write_manifest(out, "simulate", cfg, sha256_file(out / data_name), [data_name, "truth.csv", "truth.json"], {"true_params": truth})
    log.info("wrote %s", out / data_name)
    return 0


def _write_rows(path: Path, header, dates, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for d, row in zip(dates, values):
            w.writerow([d, *(repr(float(v)) for v in row)])


def cmd_pca(cfg: RunConfig, out: Path, n_components: int = 3) -> int:
    path = cfg.data_path()
    panel = read_panel_csv(path)
    decomp = pca(panel, min(n_components, panel.maturities.size, panel.n_obs - 1))
    out.mkdir(parents=True, exist_ok=True)
    k = decomp.n_components
    pcs = [f"pc{i + 1}" for i in range(k)]
    with open(out / "pca_loadings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["maturity", "mean", *pcs])
        for m, mu, row in zip(panel.maturities, decomp.mean, decomp.loadings):
            w.writerow([f"{m:g}", f"{mu:.6f}", *(f"{v:.6f}" for v in row)])
    with open(out / "pca_scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *pcs])
        for d, row in zip(panel.dates, decomp.scores):
            w.writerow([d, *(f"{v:.6f}" for v in row)])
    write_json({"explained_ratio": decomp.explained_ratio, "eigenvalues": decomp.eigenvalues}, out / "pca_summary.json")
    write_manifest(out, "pca", cfg, sha256_file(path), ["pca_loadings.csv", "pca_scores.csv", "pca_summary.json"])
    return 0


def cmd_fit(cfg: RunConfig, out: Path) -> int:
    path = cfg.data_path()
    kind, obj = load_input(path)
    x, meta = _series_from_input(kind, obj, cfg)
    s = cfg.sampler
    scfg = SamplerConfig(s.iterations, s.burn_in, s.thinning, derive_seed(cfg.seed, "fit", "chain"), s.horizon, cfg.prior)
    data = BtvcData(x)
    draws = run_chain(data, scfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / DRAWS_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*SCALAR_PARAMS, *(f"alpha_{j}" for j in range(1, draws.horizon + 1))])
        tail = draws.alpha_tail
        for m in range(len(draws)):
            scal = [draws.scalar(n)[m] for n in SCALAR_PARAMS]
            w.writerow([repr(float(v)) for v in (*scal, *tail[m])])
    summary = {
        **meta,
        "n_obs": data.x.size,
        "last_value": float(data.x[-1]),
        "horizon": draws.horizon,
        "data_sha256": sha256_file(path),
        "diagnostics": diagnostics(draws),
    }
    write_json(summary, out / FIT_SUMMARY_FILE)
    write_manifest(out, "fit", cfg, summary["data_sha256"], [DRAWS_FILE, FIT_SUMMARY_FILE])
    bad = [n for n in SCALAR_PARAMS if (summary["diagnostics"][n]["split_rhat"] or 0.0) > 1.1]
    if bad:
        log.warning("split R-hat above 1.1 for %s; consider more iterations", bad)
    return 0


def read_draws_csv(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(beta, sigma_sq, latent tail) from a draws file written by ``fit``."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read draws file {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0][: len(SCALAR_PARAMS)] != list(SCALAR_PARAMS):
        raise InputError(f"{path}, line 1: header must start with {','.join(SCALAR_PARAMS)}")
    width = len(rows[0])
    vals = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise InputError(f"{path}, line {lineno}: expected {width} fields, got {len(row)}")
        try:
            vals.append([float(v) for v in row])
        except ValueError:
            raise InputError(f"{path}, line {lineno}: non-numeric value") from None
    if not vals:
        raise InputError(f"{path}: no draws")
    a = np.array(vals)
    return a[:, 0], a[:, 1], a[:, len(SCALAR_PARAMS) :]


def cmd_forecast(cfg: RunConfig, out: Path, draws_path: Path | None = None) -> int:
    draws_path = draws_path or out / DRAWS_FILE
    summary_path = draws_path.parent / FIT_SUMMARY_FILE
    try:
        meta = json.loads(summary_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read fit summary {summary_path}: {exc}") from exc
    beta, sigma_sq, tail = read_draws_csv(draws_path)
    h = max(cfg.forecast.summary_horizons)
    if h > tail.shape[1]:
        raise ParameterError(
            f"forecast horizon {h} exceeds the latent extension of the draws ({tail.shape[1]}); "
            f"refit with sampler.horizon >= {h}"
        )
    out.mkdir(parents=True, exist_ok=True)
    rng = derive_rng(cfg.seed, "forecast", "paths")
    paths = paths_from_tail(tail[:, :h], beta, sigma_sq, meta["last_value"], rng)
    write_fan_chart_csv(fan_chart(paths, shift=meta["shift"]), out / "fan_chart.csv")
    outputs = ["fan_chart.csv"]
    if meta["kind"] == "panel":
        outputs += _curve_outputs(cfg, out, meta, paths)
    write_manifest(out, "forecast", cfg, meta.get("data_sha256"), outputs, {"draws_sha256": sha256_file(draws_path)})
    return 0


def _curve_outputs(cfg: RunConfig, out: Path, meta: dict, level_paths: np.ndarray) -> list[str]:
    """Reconstructed curve point forecasts and per-maturity rate fan charts.

    The slope score follows its zero-constant AR(1) fit; its paths add
    Gaussian innovations with the fitted residual variance.
    """
    p = meta["pca"]
    mats = np.asarray(p["maturities"], dtype=float)
    mean = np.asarray(p["mean"], dtype=float)
    load = np.asarray(p["loadings"], dtype=float)  # (2, M)
    sf = meta["slope_fit"]
    n, h = level_paths.shape
    hs = np.arange(1, h + 1)
    slope_mean = sf["slope"] ** hs * sf["last"]
    rng = derive_rng(cfg.seed, "forecast", "slope")
    shocks = rng.standard_normal((n, h)) * math.sqrt(sf["resid_var"])
    slope_paths = np.empty((n, h))
    prev = np.full(n, sf["last"])
    for j in range(h):
        prev = sf["slope"] * prev + shocks[:, j]
        slope_paths[:, j] = prev

    cols = []
    for m in cfg.forecast.report_maturities:
        hit = np.flatnonzero(np.isclose(mats, m))
        if hit.size == 0:
            raise InputError(f"forecast.report_maturities: {m} not in the fitted panel {mats.tolist()}")
        cols.append(int(hit[0]))

    decomp = PcaDecomposition(mean, load.T, np.empty((0, 2)), np.zeros(2), np.zeros(2))
    curve = reconstruct_curve(decomp, point_forecast(level_paths), slope_mean)
    labels = [f"m{m:g}" for m in cfg.forecast.report_maturities]
    with open(out / "curve_forecast.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon", *labels])
        for j in cfg.forecast.summary_horizons:
            w.writerow([j, *(f"{curve[j - 1, c]:.6f}" for c in cols)])
    with open(out / "rate_fan_chart.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["maturity", *FAN_COLUMNS])
        for m, c in zip(cfg.forecast.report_maturities, cols):
            rates = mean[c] + load[0, c] * level_paths + load[1, c] * slope_paths
            for s in fan_chart(rates, cfg.forecast.summary_horizons):
                w.writerow([f"{m:g}", s.horizon, *(f"{v:.6f}" for v in s.row()[1:])])
    return ["curve_forecast.csv", "rate_fan_chart.csv"]


def cmd_backtest(cfg: RunConfig, out: Path) -> int:
    path = cfg.data_path()
    panel = read_panel_csv(path)
    report = run_backtest(panel, list(cfg.models), cfg.backtest_config(), seed=derive_seed(cfg.seed, "backtest"))
    csv_text, txt = render_report(report)
    out.mkdir(parents=True, exist_ok=True)
    (out / "backtest_report.csv").write_text(csv_text)
    (out / "backtest_report.txt").write_text(txt)
    write_json(
        {"n_origins": report.n_origins, "data_fingerprint": report.fingerprint, "gaps": report.gaps, "config": report.config},
        out / "backtest_summary.json",
    )
    write_manifest(out, "backtest", cfg, sha256_file(path), ["backtest_report.csv", "backtest_report.txt", "backtest_summary.json"])
    sys.stdout.write(txt)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration (defaults apply to missing keys)")
    common.add_argument("--out", type=Path, help="output directory (overrides config 'out')")
    common.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="btvc", description="BTVC-AR(1) fitting, long-run forecasting and yield-curve backtests")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("show-config", parents=[common], help="print the resolved configuration")
    sub.add_parser("simulate", parents=[common], help="generate a synthetic series or yield panel")
    sp = sub.add_parser("pca", parents=[common], help="principal components of a yield panel")
    sp.add_argument("--components", type=int, default=3)
    sub.add_parser("fit", parents=[common], help="run the sampler and write posterior draws")
    sp = sub.add_parser("forecast", parents=[common], help="simulate paths from saved draws")
    sp.add_argument("--draws", type=Path, help=f"draws file (default <out>/{DRAWS_FILE})")
    sp = sub.add_parser("backtest", parents=[common], help="expanding-window out-of-sample comparison")
    sp.add_argument("--model", action="append", choices=MODEL_NAMES, help="model to include (repeatable)")
    return p


def _error_exit(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise InputError(f"--seed must be a 64-bit unsigned integer, got {args.seed}")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if getattr(args, "model", None):
            cfg = dataclasses.replace(cfg, models=tuple(dict.fromkeys(args.model)))
        out = args.out if args.out is not None else Path(cfg.base_dir) / cfg.out
        if args.command == "show-config":
            return cmd_show_config(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "pca":
            return cmd_pca(cfg, out, args.components)
        if args.command == "fit":
            return cmd_fit(cfg, out)
        if args.command == "forecast":
            return cmd_forecast(cfg, out, args.draws)
        return cmd_backtest(cfg, out)
    except InputError as exc:
        return _error_exit(exc, 2)
    except (BtvcError, ArithmeticError, ValueError, OSError) as exc:
        return _error_exit(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
