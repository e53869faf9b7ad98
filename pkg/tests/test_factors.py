from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import lfilter

from btvc.errors import InputError, ParameterError
from btvc.factors import (
    Ar1Fit,
    YieldPanel,
    fit_ols_ar1,
    forecast_dns,
    pca,
    read_panel_csv,
    reconstruct_curve,
    write_panel_csv,
)

DEMO = Path(__file__).resolve().parents[1] / "demo" / "demo_panel.csv"


def test_axis_aligned_columns():
    x = np.array([[2.0, 1.0], [-2.0, -1.0], [2.0, -1.0], [-2.0, 1.0]])
    d = pca(x, 2)
    np.testing.assert_allclose(np.abs(d.loadings), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(d.explained_ratio, [0.8, 0.2], atol=1e-12)


def test_dense_eigen_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 6)) @ rng.normal(size=(6, 6))
    d = pca(x, 2)
    xc = x - x.mean(axis=0)
    cov = np.zeros((6, 6))
    for row in xc:
        cov += np.outer(row, row)
    cov /= 49
    w, v = np.linalg.eig(cov)
    order = np.argsort(w.real)[::-1][:2]
    ref = v.real[:, order]
    ref /= np.linalg.norm(ref, axis=0)
    signs = np.sign(np.sum(ref * d.loadings, axis=0))
    np.testing.assert_allclose(d.loadings, ref * signs, atol=1e-8)
    np.testing.assert_allclose(d.scores, xc @ (ref * signs), atol=1e-8)
    np.testing.assert_allclose(d.eigenvalues, w.real[order], atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(8, 30), st.integers(2, 7)), elements=st.floats(-10, 10)), st.data())
def test_pca_invariants(x, data):
    x = x + np.random.default_rng(0).normal(scale=1e-3, size=x.shape)
    k = data.draw(st.integers(1, min(x.shape[0] - 1, x.shape[1])))
    d = pca(x, k)
    np.testing.assert_allclose(d.loadings.T @ d.loadings, np.eye(k), atol=1e-10)
    assert np.all(np.diff(d.explained_ratio) <= 1e-12)
    assert d.explained_ratio.sum() <= 1 + 1e-12
    assert np.all(d.loadings[-1] >= 0.0)
    np.testing.assert_allclose(d.scores, (x - x.mean(axis=0)) @ d.loadings, atol=1e-9)


def test_full_rank_reconstruction_is_exact():
    x = np.random.default_rng(1).normal(size=(40, 5)) * 3 + 4
    d = pca(x, 5)
    np.testing.assert_allclose(d.reconstruct(d.scores), x, atol=1e-8)


def test_invalid_component_count():
    with pytest.raises(ParameterError):
        pca(np.zeros((5, 3)) + np.arange(15).reshape(5, 3) ** 2, 4)


def test_rank_deficiency_warns():
    x = np.outer(np.arange(10.0), [1.0, 2.0, 3.0])
    with pytest.warns(RuntimeWarning):
        pca(x, 2)


def test_reconstruct_curve_properties():
    x = np.random.default_rng(2).normal(size=(30, 4))
    d = pca(x, 2)
    np.testing.assert_allclose(reconstruct_curve(d, 0.0, 0.0), d.mean)
    a, b = reconstruct_curve(d, 1.5, -0.3), reconstruct_curve(d, -0.2, 0.7)
    np.testing.assert_allclose(reconstruct_curve(d, 1.3, 0.4), a + b - d.mean, atol=1e-14)
    full = pca(x, 4)
    np.testing.assert_allclose(full.reconstruct(full.scores[7]), x[7], atol=1e-8)
    assert reconstruct_curve(d, np.zeros(3), np.zeros(3)).shape == (3, 4)
    with pytest.raises(ParameterError):
        reconstruct_curve(pca(x, 1), 0.0, 0.0)


def test_demo_panel_two_factors_explain_99_percent():
    d = pca(read_panel_csv(DEMO), 2)
    assert d.explained_ratio.sum() >= 0.99


# --- OLS AR(1) ----------------------------------------------------------------


def test_exact_recursions():
    x = 0.5 ** np.arange(10) * 8.0
    f = fit_ols_ar1(x, fix_constant_zero=True)
    assert f.slope == pytest.approx(0.5, abs=1e-14) and f.resid_var == pytest.approx(0.0, abs=1e-20)
    y = np.empty(12)
    y[0] = 5.0
    for i in range(1, 12):
        y[i] = 1.0 + 0.5 * y[i - 1]
    g = fit_ols_ar1(y)
    assert g.const == pytest.approx(1.0, abs=1e-9) and g.slope == pytest.approx(0.5, abs=1e-9)


def test_ols_consistency():
    x = lfilter([1.0], [1.0, -0.7], np.random.default_rng(3).normal(size=10_000))
    assert fit_ols_ar1(x).slope == pytest.approx(0.7, abs=0.03)


def test_residual_variance_uses_n_minus_p():
    x = np.array([1.0, 2.0, 0.5, 1.5, 3.0])
    f = fit_ols_ar1(x)
    design = np.column_stack([np.ones(4), x[:-1]])
    coef, rss, *_ = np.linalg.lstsq(design, x[1:], rcond=None)
    np.testing.assert_allclose([f.const, f.slope], coef, atol=1e-12)
    assert f.resid_var == pytest.approx(rss[0] / 2, rel=1e-12)


def test_zero_variance_regressor():
    with pytest.raises(ParameterError):
        fit_ols_ar1(np.ones(10))
    with pytest.raises(ParameterError):
        fit_ols_ar1(np.zeros(10), fix_constant_zero=True)


def test_ar1_forecast_examples():
    f = Ar1Fit(2.0, 0.0, 1.0)
    np.testing.assert_allclose(f.forecast(7.0, [1, 2, 5]), 2.0)
    g = Ar1Fit(0.5, 0.8, 1.0)
    assert g.forecast(3.0, 1) == pytest.approx(0.5 + 0.8 * 3.0)
    assert g.forecast(3.0, 400) == pytest.approx(0.5 / 0.2, abs=1e-9)
    assert Ar1Fit(0.0, 1.0, 1.0).long_run_variance == np.inf
    out = forecast_dns([g, Ar1Fit(0.0, 0.5, 1.0)], [3.0, 4.0], [1, 2])
    np.testing.assert_allclose(out, [[2.9, 2.0], [2.82, 1.0]])


# --- CSV ---------------------------------------------------------------------------


def test_panel_csv_round_trip(tmp_path):
    p = YieldPanel(["2000-01", "2000-02"], [1.0, 2.5], [[1.0, 2.0], [1.5, 2.25]])
    write_panel_csv(p, tmp_path / "p.csv")
    q = read_panel_csv(tmp_path / "p.csv")
    assert q.dates == p.dates
    np.testing.assert_array_equal(q.maturities, p.maturities)
    np.testing.assert_array_equal(q.rates, p.rates)


@pytest.mark.parametrize(
    "body,line",
    [
        ("date,m1,m2\n2000-01,1,2\n2000-02,1\n", 3),
        ("date,m1,m2\n2000-01,1,2\nJan 2000,1,2\n", 3),
        ("date,m1,m2\n2000-01,1,x\n", 2),
        ("date,m1,m2\n2000-01,1,2\n2000-02,1,nan\n", 3),
        ("date,m1,m2\n2000-02,1,2\n2000-01,1,2\n", 3),
    ],
)
def test_malformed_csv_names_the_line(tmp_path, body, line):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(InputError, match=f"line {line}"):
        read_panel_csv(f)


def test_panel_rejects_unsorted_maturities():
    with pytest.raises(ParameterError):
        YieldPanel(["2000-01"], [2.0, 1.0], [[1.0, 2.0]])
