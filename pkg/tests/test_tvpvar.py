import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldf.density import MvGaussian
from ldf.tvpvar import (
    TvpVarSpec,
    UniverseGrids,
    calibrate_sigma,
    enumerate_universe,
    initial_state,
    large_fx_grids,
    minnesota_prior,
    regressor_matrix,
    run_filter,
    simulate_tvp_var,
    small_fx_grids,
    standardize,
    tvpvar_step,
    uip_restricted_grids,
    universe_panel,
    var_design,
)


def batch_posterior(spec, X, Y, sigma):
    """Static conjugate regression on the active coefficients: prior N(0, Omega)."""
    Om = minnesota_prior(spec)
    act = np.diag(Om) > 0
    Si = np.linalg.inv(sigma)
    prec = np.linalg.inv(Om[np.ix_(act, act)])
    rhs = np.zeros(act.sum())
    for x, y in zip(X, Y):
        xa = x[:, act]
        prec = prec + xa.T @ Si @ xa
        rhs = rhs + xa.T @ Si @ y
    b = np.zeros(spec.k)
    b[act] = np.linalg.solve(prec, rhs)
    return b, np.linalg.inv(prec)


def test_dimension_formula():
    spec = TvpVarSpec(2, 1, 1, 0, (1, 1, 1, 1))
    assert spec.k == 8
    assert minnesota_prior(spec).shape == (8, 8)
    assert TvpVarSpec(9, 6, 3, 1, (1,) * 7).k == 9 * (1 + 54 + 4)


def test_minnesota_entries():
    spec = TvpVarSpec(2, 2, 1, 1, (10.0, 0.5, 0.1, 0.3, 0.7))
    d = np.diag(minnesota_prior(spec))
    # equation 1 block: intercept, lag1 (y1, y2), lag2 (y1, y2), x, xx
    np.testing.assert_allclose(d[:7], [10.0, 0.5, 0.1, 0.125, 0.025, 0.3, 0.7])
    # equation 2: own lag is y2
    np.testing.assert_allclose(d[7:14], [10.0, 0.1, 0.5, 0.025, 0.125, 0.3, 0.7])


def test_all_zero_gamma_gives_zero_forecast():
    spec = TvpVarSpec(2, 1, 0, 0, (0, 0, 0), kappa=1.0)
    assert not minnesota_prior(spec).any()
    st0 = initial_state(spec, np.eye(2) * 0.5)
    X = regressor_matrix(spec, [[1.0, 2.0]])
    new, pred = tvpvar_step(st0, X, np.array([3.0, -1.0]))
    np.testing.assert_array_equal(pred.mean, 0.0)
    np.testing.assert_allclose(pred.covariance, np.eye(2) * 0.5)
    assert not new.beta_mean.any()


@pytest.mark.parametrize(
    "kw",
    [
        dict(gamma=(1, -1, 1)),
        dict(gamma=(1, 1)),
        dict(gamma=(1, 1, 1), lam=0.0),
        dict(gamma=(1, 1, 1), kappa=1.5),
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        TvpVarSpec(2, 1, **kw)


def test_regressor_layout():
    spec = TvpVarSpec(2, 1, 1, 1, (1,) * 5)
    X = regressor_matrix(spec, [[0.5, -0.5]], asset=[[7.0], [8.0]], common=[9.0])
    np.testing.assert_array_equal(X[0, :5], [1, 0.5, -0.5, 7, 9])
    np.testing.assert_array_equal(X[1, 5:], [1, 0.5, -0.5, 8, 9])
    assert not X[0, 5:].any() and not X[1, :5].any()


def test_recursive_matches_batch_oracle():
    rng = np.random.default_rng(3)
    spec = TvpVarSpec(2, 2, 0, 0, (1.0, 0.5, 0.1), lam=1.0, kappa=1.0)
    Y = rng.normal(size=(150, 2))
    X, tg = var_design(spec, Y)
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    _, betas, state = run_filter(spec, X, tg, sigma)
    b, P = batch_posterior(spec, X, tg, sigma)
    act = state.active
    assert np.max(np.abs(state.beta_mean - b)) < 1e-8
    assert np.max(np.abs(state.beta_cov[np.ix_(act, act)] - P)) < 1e-8


def test_constant_beta_converges_and_cov_shrinks():
    rng = np.random.default_rng(0)
    spec = TvpVarSpec(1, 1, 0, 0, (10.0, 1.0, 1.0), lam=1.0, kappa=1.0)
    T = 3000
    y = np.zeros(T + 1)
    for t in range(T):
        y[t + 1] = 0.2 + 0.5 * y[t] + 0.3 * rng.normal()
    X, tg = var_design(spec, y[:, None])
    _, betas, state = run_filter(spec, X, tg, np.array([[0.09]]))
    np.testing.assert_allclose(state.beta_mean, [0.2, 0.5], atol=0.03)
    assert np.trace(state.beta_cov) < 1e-3


def test_excluded_coefficients_stay_zero():
    rng = np.random.default_rng(1)
    spec = TvpVarSpec(3, 1, 0, 0, (1.0, 0.5, 0.0), lam=0.9, kappa=0.97)
    Y = rng.normal(size=(80, 3))
    X, tg = var_design(spec, Y)
    _, betas, _ = run_filter(spec, X, tg, np.eye(3))
    excluded = np.diag(minnesota_prior(spec)) == 0
    assert excluded.any()
    assert np.all(betas[:, excluded] == 0.0)


def test_ewma_sigma_step():
    spec = TvpVarSpec(2, 0, 0, 0, (0, 0, 0), kappa=0.97)
    st0 = initial_state(spec, np.eye(2))
    X = regressor_matrix(spec, np.zeros((0, 2)))
    new, _ = tvpvar_step(st0, X, np.array([1.0, 0.0]))
    np.testing.assert_allclose(new.sigma, 0.97 * np.eye(2) + 0.03 * np.diag([1.0, 0.0]))


def test_forgetting_inflates_predictive_variance():
    spec1 = TvpVarSpec(1, 1, 0, 0, (1.0, 0.5, 0.5), lam=1.0, kappa=1.0)
    spec2 = TvpVarSpec(1, 1, 0, 0, (1.0, 0.5, 0.5), lam=0.5, kappa=1.0)
    X = regressor_matrix(spec1, [[1.0]])
    _, p1 = tvpvar_step(initial_state(spec1, [[1.0]]), X, [0.0])
    _, p2 = tvpvar_step(initial_state(spec2, [[1.0]]), X, [0.0])
    # X P X' doubles: (1 + 0.5) -> 3, plus Sigma = 1
    assert p1.covariance[0, 0] == pytest.approx(2.5)
    assert p2.covariance[0, 0] == pytest.approx(4.0)


@given(st.integers(0, 1000), st.sampled_from([0.7, 0.9, 1.0]), st.sampled_from([0.9, 0.97, 1.0]))
def test_predictive_covariance_pd(seed, lam, kappa):
    rng = np.random.default_rng(seed)
    spec = TvpVarSpec(2, 1, 0, 0, (1.0, 0.5, 0.1), lam=lam, kappa=kappa)
    Y = rng.normal(size=(30, 2)) * rng.uniform(0.1, 3)
    X, tg = var_design(spec, Y)
    dens, _, state = run_filter(spec, X, tg, np.eye(2))
    for d in dens:
        assert isinstance(d, MvGaussian)
        assert np.all(np.linalg.eigvalsh(d.covariance) > 0)
    np.testing.assert_allclose(state.beta_cov, state.beta_cov.T, atol=1e-12)


def test_drifting_beta_tracking():
    rmse = {1.0: [], 0.95: []}
    for seed in range(10):
        spec = TvpVarSpec(2, 1, 0, 0, (1.0, 0.5, 0.5), lam=1.0, kappa=1.0)
        Y, B = simulate_tvp_var(spec, 300, 0.02, seed)
        for lam in rmse:
            s = TvpVarSpec(2, 1, 0, 0, (1.0, 0.5, 0.5), lam=lam, kappa=1.0)
            X, tg = var_design(s, Y)
            _, bb, _ = run_filter(s, X, tg, np.eye(2) * 0.1)
            rmse[lam].append(np.sqrt(np.mean((bb - B) ** 2)))
    assert np.mean(rmse[0.95]) < np.mean(rmse[1.0])


def test_universe_counts():
    assert len(enumerate_universe(uip_restricted_grids())) == 64
    assert len(enumerate_universe(small_fx_grids())) == 32
    big = enumerate_universe(large_fx_grids())
    assert len(big) == 2048 == large_fx_grids().size
    assert big[0].lam == 0.5 and big[-1].lam == 1.0


def test_universe_order_is_lexicographic():
    g = UniverseGrids(m=1, gamma1=(0.0, 1.0), gamma2=(0.1, 0.2), gamma3=(0.0,), lam=(0.9, 1.0))
    specs = enumerate_universe(g)
    keys = [(s.p, s.kappa, s.lam, s.alpha, *s.gamma) for s in specs]
    assert keys == sorted(keys)
    with pytest.raises(ValueError):
        UniverseGrids(m=1, gamma2=())


def test_universe_panel_alignment():
    rng = np.random.default_rng(2)
    Y = rng.normal(size=(60, 2))
    g = UniverseGrids(m=2, gamma2=(0.1,), gamma3=(0.0,), p=(1, 3))
    panel = universe_panel(enumerate_universe(g), Y, calibration=20)
    assert panel.K == 4 and panel.T == 57
    np.testing.assert_array_equal(panel.y, Y[3:])
    assert np.all(np.isfinite(panel.log_scores()))


def test_standardize_uses_prefix_only():
    x = np.arange(20.0)[:, None]
    z, mu, sd = standardize(x, 10)
    assert mu[0] == 4.5
    assert np.mean(z[:10]) == pytest.approx(0.0)
    assert np.std(z[:10], ddof=1) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        standardize(x, 1)
    assert calibrate_sigma(np.ones((5, 1)) * np.arange(5)[:, None], 5)[0, 0] == pytest.approx(2.5)
