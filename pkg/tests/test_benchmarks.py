import numpy as np
import pytest

from conftest import random_gaussian_panel
from ldf.benchmarks import (
    BestNConfig,
    EwmaRwConfig,
    best_n_run,
    bma_run,
    calibrated_initial_variance,
    dma_run,
    dml_run,
    ewma_covariances,
    ewma_rw_densities,
    ewma_variances,
    simple_average_run,
)
from ldf.core import LdfConfig, ldf_run
from ldf.density import Gaussian, MvGaussian
from ldf.panel import ForecastPanel


def _dma_by_hand(logp, alpha, c):
    """Probability-space DMA for short panels (no log tricks)."""
    T, K = logp.shape
    pi = np.full(K, 1.0 / K)
    out = []
    for t in range(T):
        out.append(pi.copy())
        post = pi * np.exp(logp[t])
        post /= post.sum()
        q = post**alpha
        q /= q.sum()
        pi = (q + c) / (1 + K * c)
    return np.array(out)


@pytest.mark.parametrize("alpha,c", [(0.9, 0.0), (0.5, 1e-3), (1.0, 0.0), (0.95, 1e-20)])
def test_dma_matches_probability_space(small_panel, alpha, c):
    tr = dma_run(small_panel, alpha, c)
    np.testing.assert_allclose(tr.base_weights, _dma_by_hand(small_panel.log_scores(), alpha, c), atol=1e-12)


def test_dma_equals_single_softmax_layer(small_panel):
    for alpha, c in [(0.9, 1e-20), (0.6, 0.0), (0.99, 1e-4)]:
        a = dma_run(small_panel, alpha, c)
        b = ldf_run(small_panel, LdfConfig.dma(alpha, c))
        np.testing.assert_allclose(a.base_weights, b.base_weights, atol=1e-12)
        np.testing.assert_allclose(a.log_scores, b.log_scores, atol=1e-12)


def test_dma_weight_floor(small_panel):
    c = 1e-3
    tr = dma_run(small_panel, 0.9, c)
    assert np.all(tr.base_weights[1:] >= c / (1 + small_panel.K * c) - 1e-15)


def test_bma_is_dma_one(small_panel):
    np.testing.assert_array_equal(bma_run(small_panel).base_weights, dma_run(small_panel, 1.0, 0.0).base_weights)


def test_dml_equals_aa_with_unit_top_grid(small_panel):
    grid = (1.0, 0.9, 0.7, 0.4)
    a = dml_run(small_panel, grid, 1.0)
    b = ldf_run(small_panel, LdfConfig.from_code("aa", 1.0, grid, c=0.0))
    np.testing.assert_array_equal(a.base_weights, b.base_weights)
    np.testing.assert_allclose(a.log_scores, b.log_scores, atol=1e-12)


def test_dml_selects_one_model(small_panel):
    tr = dml_run(small_panel, (1.0, 0.5))
    w = tr.base_weights[1:]
    assert np.all((w == 0) | (w == 1)) and np.all(w.sum(axis=1) == 1)


def test_simple_average_score(small_panel):
    tr = simple_average_run(small_panel)
    logp = small_panel.log_scores()
    np.testing.assert_allclose(tr.log_scores, np.log(np.mean(np.exp(logp), axis=1)), atol=1e-12)


def test_best_n_window():
    T = 12
    y = np.zeros(T)
    # model 2 is best in the first half, model 0 in the second
    means = np.zeros((T, 3))
    means[:6] = [2.0, 1.0, 0.0]
    means[6:] = [0.0, 1.0, 2.0]
    panel = ForecastPanel.gaussian(means, 1.0, y)
    tr = best_n_run(panel, BestNConfig(1, 2))
    np.testing.assert_array_equal(tr.base_weights[0], [1, 0, 0])  # warm-up: lowest index
    np.testing.assert_array_equal(tr.base_weights[5], [0, 0, 1])
    np.testing.assert_array_equal(tr.base_weights[8], [1, 0, 0])
    two = best_n_run(panel, BestNConfig(2, 3))
    np.testing.assert_allclose(two.base_weights[4], [0, 0.5, 0.5])


def test_best_n_validation(small_panel):
    with pytest.raises(ValueError):
        BestNConfig(0, 3)
    with pytest.raises(ValueError):
        best_n_run(small_panel, BestNConfig(small_panel.K + 1, 3))


def test_ewma_variance_recursion():
    r = np.array([0.1, -0.2, 0.05])
    v = ewma_variances(r, 0.97, 0.01)
    assert v[0] == 0.01
    assert v[1] == pytest.approx(0.97 * 0.01 + 0.03 * 0.01)
    assert v[2] == pytest.approx(0.97 * v[1] + 0.03 * 0.04)
    dens = ewma_rw_densities(r, EwmaRwConfig(0.97, 0.01))
    assert all(isinstance(d, Gaussian) and d.mean == 0.0 for d in dens)


def test_ewma_covariance_panel():
    rng = np.random.default_rng(0)
    R = rng.normal(size=(50, 3))
    C = ewma_covariances(R, 0.9, np.eye(3))
    for t in range(49):
        np.testing.assert_allclose(C[t + 1], 0.9 * C[t] + 0.1 * np.outer(R[t], R[t]))
    dens = ewma_rw_densities(R, EwmaRwConfig(0.9), np.eye(3))
    assert isinstance(dens[0], MvGaussian) and dens[0].dim == 3
    S0 = calibrated_initial_variance(R, 20)
    np.testing.assert_allclose(S0, np.cov(R[:20], rowvar=False))


@pytest.mark.parametrize("bad", [dict(decay=1.0), dict(decay=0.0), dict(initial_variance=0.0)])
def test_ewma_config_validation(bad):
    with pytest.raises(ValueError):
        EwmaRwConfig(**bad)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_panel_rejected():
    panel = ForecastPanel.gaussian(np.array([[0.0, 1e200]]), 1e-300, np.array([0.0]))
    with pytest.raises(FloatingPointError):
        dma_run(panel, 0.9)


def test_extreme_scores_stay_finite(rng):
    panel = random_gaussian_panel(rng, 50, 4, spread=150.0)
    assert panel.log_scores().min() < -1e3
    for tr in [dma_run(panel, 0.9, 1e-20), bma_run(panel), dml_run(panel, (1.0, 0.5)), simple_average_run(panel)]:
        assert np.all(np.isfinite(tr.base_weights)) and np.all(np.isfinite(tr.log_scores))
