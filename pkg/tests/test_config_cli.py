import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml

from btvc.cli import main, read_draws_csv
from btvc.config import RunConfig, dump_config, load_config, parse_config
from btvc.errors import InputError
from btvc.simulate import monthly_dates

DEMO = Path(__file__).resolve().parents[1] / "demo"


def write_cfg(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def small_fit_doc(data="panel.csv", **sampler):
    return {
        "seed": 3,
        "out": "out",
        "data": {"path": data},
        "sampler": {"iterations": 200, "burn_in": 50, "thinning": 2, "horizon": 24, **sampler},
        "forecast": {"summary_horizons": [1, 12, 24]},
        "backtest": {"initial_window": 40, "iterations": 120, "burn_in": 40},
    }


@pytest.fixture
def panel_dir(tmp_path):
    shutil.copy(DEMO / "demo_panel.csv", tmp_path / "full.csv")
    # First 60 months keep the CLI tests quick.
    lines = (tmp_path / "full.csv").read_text().splitlines()[:61]
    (tmp_path / "panel.csv").write_text("\n".join(lines) + "\n")
    return tmp_path


def error_payload(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


# --- configuration ----------------------------------------------------------


def test_defaults_round_trip_through_yaml():
    cfg = RunConfig()
    again = parse_config(yaml.safe_load(dump_config(cfg)))
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.sampler.iterations == 10_000 and cfg.prior.target_var == 120.0


def test_digest_ignores_output_location():
    a = parse_config({"out": "a", "data": {"path": "x.csv"}})
    b = parse_config({"out": "b", "data": {"path": "y.csv"}})
    c = parse_config({"seed": 1})
    assert a.digest() == b.digest() != c.digest()


@pytest.mark.parametrize(
    "doc",
    [
        {"sampler": {"iterationz": 5}},
        {"bogus": 1},
        {"sampler": {"iterations": "many"}},
        {"sampler": {"iterations": 10, "burn_in": 10}},
        {"prior": {"sigma_rho": -1.0}},
        {"models": ["btvc", "arima"]},
        {"seed": -4},
        {"backtest": {"horizons": [1, 48]}},
        [1, 2, 3],
    ],
)
def test_invalid_configs_rejected(doc):
    with pytest.raises(InputError):
        parse_config(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(InputError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("sampler: [unclosed\n")
    with pytest.raises(InputError):
        load_config(bad)


# --- CLI ---------------------------------------------------------------------


def test_show_config_prints_defaults(capsys):
    assert main(["show-config"]) == 0
    assert yaml.safe_load(capsys.readouterr().out) == RunConfig().to_dict()


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"sampler": {"iterationz": 5}})
    assert main(["fit", "--config", str(cfg)]) == 2
    err = error_payload(capsys)
    assert err["exit_code"] == 2 and "iterationz" in err["message"]


def test_ragged_csv_exits_2_and_names_the_line(tmp_path, capsys):
    (tmp_path / "panel.csv").write_text("date,m1,m2\n2000-01,1,2\n2000-02,1,2\n2000-03,1\n")
    cfg = write_cfg(tmp_path, small_fit_doc())
    assert main(["fit", "--config", str(cfg)]) == 2
    assert "line 4" in error_payload(capsys)["message"]


def test_fit_forecast_outputs(panel_dir, capsys):
    cfg = write_cfg(panel_dir, small_fit_doc())
    assert main(["fit", "--config", str(cfg)]) == 0
    out = panel_dir / "out"
    beta, sigma_sq, tail = read_draws_csv(out / "draws.csv")
    assert beta.size == (200 - 50) // 2 and tail.shape == (75, 24)
    summary = json.loads((out / "fit_summary.json").read_text())
    assert summary["kind"] == "panel" and summary["n_obs"] == 60

    assert main(["forecast", "--config", str(cfg)]) == 0
    rows = list(csv.DictReader((out / "fan_chart.csv").read_text().splitlines()))
    assert [int(r["horizon"]) for r in rows] == list(range(1, 25))
    curve = list(csv.reader((out / "curve_forecast.csv").read_text().splitlines()))
    assert curve[0] == ["horizon", "m1", "m3", "m5", "m10"]
    assert [r[0] for r in curve[1:]] == ["1", "12", "24"]
    manifest = json.loads((out / "manifest_forecast.json").read_text())
    assert set(manifest["outputs"]) == {"fan_chart.csv", "curve_forecast.csv", "rate_fan_chart.csv"}


def test_forecast_beyond_latent_extension_exits_1(panel_dir, capsys):
    cfg = write_cfg(panel_dir, small_fit_doc())
    assert main(["fit", "--config", str(cfg)]) == 0
    long = write_cfg(panel_dir, {**small_fit_doc(), "forecast": {"summary_horizons": [1, 48]}}, "long.yaml")
    assert main(["forecast", "--config", str(long), "--draws", str(panel_dir / "out" / "draws.csv")]) == 1
    assert "refit" in error_payload(capsys)["message"]


def test_same_config_twice_gives_identical_outputs(panel_dir):
    cfg = write_cfg(panel_dir, small_fit_doc())
    hashes = []
    for out in ("r1", "r2"):
        for cmd in ("fit", "forecast"):
            assert main([cmd, "--config", str(cfg), "--out", str(panel_dir / out)]) == 0
        m = [json.loads((panel_dir / out / f"manifest_{c}.json").read_text()) for c in ("fit", "forecast")]
        hashes.append([x["outputs"] for x in m])
    assert hashes[0] == hashes[1]


def test_seed_override_changes_draws(panel_dir):
    cfg = write_cfg(panel_dir, small_fit_doc())
    assert main(["fit", "--config", str(cfg), "--out", str(panel_dir / "a")]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(panel_dir / "b"), "--seed", "4"]) == 0
    assert (panel_dir / "a" / "draws.csv").read_bytes() != (panel_dir / "b" / "draws.csv").read_bytes()
    assert json.loads((panel_dir / "b" / "manifest_fit.json").read_text())["seed"] == 4


def test_simulate_is_reproducible(tmp_path):
    doc = {"seed": 9, "simulate": {"n_obs": 50, "panel": False, "warmup": 100}}
    cfg = write_cfg(tmp_path, doc)
    for out in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()
    truth = json.loads((tmp_path / "a" / "truth.json").read_text())
    assert truth["tau_sq"] == pytest.approx(0.0151406939409633, rel=1e-12)


def test_series_fit_with_centering(tmp_path):
    x = np.random.default_rng(0).normal(size=40).cumsum() * 0.1 + 5.0
    (tmp_path / "s.csv").write_text("date,x\n" + "".join(f"{d},{float(v)!r}\n" for d, v in zip(monthly_dates(40), x)))
    doc = {**small_fit_doc("s.csv"), "data": {"path": "s.csv", "center": True}}
    cfg = write_cfg(tmp_path, doc)
    assert main(["fit", "--config", str(cfg)]) == 0
    summary = json.loads((tmp_path / "out" / "fit_summary.json").read_text())
    assert summary["kind"] == "series" and summary["shift"] == pytest.approx(x.mean())


def test_pca_and_backtest_commands(panel_dir, capsys):
    cfg = write_cfg(panel_dir, small_fit_doc())
    assert main(["pca", "--config", str(cfg)]) == 0
    ratios = json.loads((panel_dir / "out" / "pca_summary.json").read_text())["explained_ratio"]
    assert len(ratios) == 3 and sum(ratios[:2]) >= 0.99
    assert main(["backtest", "--config", str(cfg), "--model", "dns", "--model", "ar1"]) == 0
    text = capsys.readouterr().out
    assert "The dynamic Nelson-Siegel model" in text and "BTVC" not in text
    assert (panel_dir / "out" / "backtest_report.csv").read_text().startswith("model,horizon,maturity,n,mean,sd,rmse\n")


def test_missing_data_path_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"seed": 1})
    assert main(["fit", "--config", str(cfg)]) == 2
