"""Time-varying-parameter VAR forecasters with forgetting factors.

Measurement:  y_t = X_t beta_t + e_t,   e_t ~ N(0, Sigma_t)
State:        beta_{t+1} = beta_t + u_t

The state noise is never specified directly. Each prediction step inflates the
coefficient covariance by 1 / lambda, which is the same as Q_t = P (1 - lambda) / lambda.
Sigma_t is an EWMA of posterior residual outer products with decay kappa.

Coefficients are stacked equation by equation. Each equation's block is

    [intercept, lag 1 (y_1..y_m), ..., lag p (y_1..y_m), asset-specific x (n_x), common x (n_xx)]

so k = m * (1 + p*m + n_x + n_xx).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .density import MvGaussian, cholesky_with_jitter
from .panel import ForecastPanel


@dataclass(frozen=True)
class TvpVarSpec:
    m: int
    p: int
    n_x: int = 0
    n_xx: int = 0
    gamma: tuple = ()
    lam: float = 1.0
    kappa: float = 0.97
    # discount of the combination layer this model belongs to; the filter ignores it
    alpha: float = 1.0

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if self.m < 1 or self.p < 0 or self.n_x < 0 or self.n_xx < 0:
            raise ValueError("invalid VAR dimensions")
        if len(gamma) != 3 + self.n_x + self.n_xx:
            raise ValueError(f"gamma needs {3 + self.n_x + self.n_xx} entries, got {len(gamma)}")
        if any(g < 0 for g in gamma):
            raise ValueError("shrinkage parameters must be nonnegative")
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")
        # kappa = 1 keeps Sigma fixed
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")

    @property
    def per_equation(self) -> int:
        return 1 + self.p * self.m + self.n_x + self.n_xx

    @property
    def k(self) -> int:
        return self.m * self.per_equation


def minnesota_prior(spec: TvpVarSpec) -> np.ndarray:
    """Diagonal prior covariance of beta_0 (prior mean is zero).

    intercept gamma_1, own lag l gamma_2 / l^2, cross lag l gamma_3 / l^2,
    j-th exogenous regressor gamma_{3+j}. A zero entry pins the coefficient at 0.
    """
    g = spec.gamma
    diag = []
    for i in range(spec.m):
        diag.append(g[0])
        for lag in range(1, spec.p + 1):
            for j in range(spec.m):
                diag.append((g[1] if i == j else g[2]) / lag**2)
        diag.extend(g[3:])
    return np.diag(np.asarray(diag, dtype=float))


def regressor_matrix(spec: TvpVarSpec, lags, asset=None, common=None) -> np.ndarray:
    """X_t (m x k) from ``lags`` (p x m, most recent first), ``asset`` (m x n_x), ``common`` (n_xx)."""
    lags = np.asarray(lags, dtype=float).reshape(spec.p, spec.m)
    asset = np.zeros((spec.m, 0)) if asset is None else np.asarray(asset, dtype=float).reshape(spec.m, spec.n_x)
    common = np.zeros(0) if common is None else np.asarray(common, dtype=float).reshape(spec.n_xx)
    q = spec.per_equation
    X = np.zeros((spec.m, spec.k))
    for i in range(spec.m):
        row = np.concatenate(([1.0], lags.ravel(), asset[i], common))
        X[i, i * q : (i + 1) * q] = row
    return X


def var_design(spec: TvpVarSpec, Y, asset=None, common=None):
    """Regressor matrices and targets for t = p .. T-1.

    ``asset`` is T x m x n_x and ``common`` T x n_xx; exogenous variables enter
    with one lag. Returns (X, targets) with X of shape (T - p, m, k).
    """
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[0]
    start = max(spec.p, 1 if (spec.n_x or spec.n_xx) else 0)
    Xs = []
    for t in range(start, T):
        lags = Y[t - spec.p : t][::-1]
        a = None if asset is None or spec.n_x == 0 else np.asarray(asset)[t - 1]
        c = None if common is None or spec.n_xx == 0 else np.asarray(common)[t - 1]
        if spec.n_x and a is None or spec.n_xx and c is None:
            raise ValueError("spec has exogenous regressors but none were supplied")
        Xs.append(regressor_matrix(spec, lags, a, c))
    return np.array(Xs), Y[start:]


@dataclass
class TvpVarState:
    spec: TvpVarSpec
    beta_mean: np.ndarray
    beta_cov: np.ndarray
    sigma: np.ndarray
    t: int = 0
    active: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.active is None:
            self.active = np.diag(self.beta_cov) > 0


def initial_state(spec: TvpVarSpec, sigma0) -> TvpVarState:
    prior = minnesota_prior(spec)
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    if sigma0.shape != (spec.m, spec.m):
        raise ValueError("initial Sigma must be m x m")
    return TvpVarState(spec, np.zeros(spec.k), prior, sigma0.copy())


def tvpvar_step(state: TvpVarState, X, y):
    """Forecast y_t, then update on it. Returns (new state, predictive MvGaussian)."""
    spec = state.spec
    X = np.asarray(X, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if X.shape != (spec.m, spec.k) or y.shape != (spec.m,):
        raise ValueError(f"expected X {(spec.m, spec.k)} and y {(spec.m,)}, got {X.shape}, {y.shape}")
    act = state.active
    b = state.beta_mean[act]
    P = state.beta_cov[np.ix_(act, act)] / spec.lam
    Xa = X[:, act]
    mean = Xa @ b
    S = Xa @ P @ Xa.T + state.sigma
    S = 0.5 * (S + S.T)
    L = cholesky_with_jitter(S)
    predictive = MvGaussian(mean, S)

    # Kalman gain P X' S^-1 via the Cholesky factor of S
    PX = P @ Xa.T
    gain = np.linalg.solve(L.T, np.linalg.solve(L, PX.T)).T
    b_new = b + gain @ (y - mean)
    P_new = P - gain @ PX.T
    P_new = 0.5 * (P_new + P_new.T)

    beta_mean = np.zeros(spec.k)
    beta_mean[act] = b_new
    beta_cov = np.zeros((spec.k, spec.k))
    beta_cov[np.ix_(act, act)] = P_new
    sigma = state.sigma
    if spec.kappa < 1:
        resid = y - Xa @ b_new
        sigma = spec.kappa * sigma + (1 - spec.kappa) * np.outer(resid, resid)
    new = TvpVarState(spec, beta_mean, beta_cov, sigma, state.t + 1, act)
    return new, predictive


def run_filter(spec: TvpVarSpec, X, Y, sigma0):
    """Filter a whole sample; returns (predictive densities, filtered beta means, final state)."""
    state = initial_state(spec, sigma0)
    dens, betas = [], []
    for Xt, yt in zip(X, Y):
        state, d = tvpvar_step(state, Xt, yt)
        dens.append(d)
        betas.append(state.beta_mean)
    return dens, np.array(betas), state


# ---------------------------------------------------------------------------
# data preparation


def standardize(data, prefix: int):
    """Standardise with the mean and sd of the first ``prefix`` rows."""
    data = np.asarray(data, dtype=float)
    if prefix < 2:
        raise ValueError("calibration prefix needs at least two rows")
    mu = data[:prefix].mean(axis=0)
    sd = data[:prefix].std(axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    return (data - mu) / sd, mu, sd


def calibrate_sigma(Y, prefix: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)[:prefix]
    if Y.shape[0] < 2:
        raise ValueError("calibration prefix needs at least two rows")
    return np.atleast_2d(np.cov(Y, rowvar=False))


# ---------------------------------------------------------------------------
# model universes


@dataclass(frozen=True)
class UniverseGrids:
    """Candidate values per hyperparameter.

    Enumeration order (slowest first): p, kappa, lambda, alpha, gamma_1,
    gamma_2, gamma_3, then one grid per exogenous regressor.
    """

    m: int
    n_x: int = 0
    n_xx: int = 0
    gamma1: tuple = (0.0, 10.0)
    gamma2: tuple = (0.0, 0.1, 0.5, 0.9)
    gamma3: tuple = (0.0, 0.1, 0.5, 0.9)
    gamma_exog: tuple = ()
    lam: tuple = (1.0,)
    alpha: tuple = (1.0,)
    kappa: tuple = (0.97,)
    p: tuple = (6,)

    def __post_init__(self):
        exog = tuple(tuple(g) for g in self.gamma_exog)
        object.__setattr__(self, "gamma_exog", exog)
        if len(exog) != self.n_x + self.n_xx:
            raise ValueError("one gamma grid per exogenous regressor required")
        grids = [self.gamma1, self.gamma2, self.gamma3, self.lam, self.alpha, self.kappa, self.p, *exog]
        if any(len(g) == 0 for g in grids):
            raise ValueError("every grid must be non-empty")

    @property
    def size(self) -> int:
        n = 1
        for g in (self.p, self.kappa, self.lam, self.alpha, self.gamma1, self.gamma2, self.gamma3, *self.gamma_exog):
            n *= len(g)
        return n


def enumerate_universe(grids: UniverseGrids) -> list:
    specs = []
    for p, kappa, lam, alpha, g1, g2, g3, *gx in itertools.product(
        grids.p, grids.kappa, grids.lam, grids.alpha, grids.gamma1, grids.gamma2, grids.gamma3, *grids.gamma_exog
    ):
        specs.append(
            TvpVarSpec(grids.m, p, grids.n_x, grids.n_xx, (g1, g2, g3, *gx), lam=lam, kappa=kappa, alpha=alpha)
        )
    return specs


def uip_restricted_grids(m: int = 9) -> UniverseGrids:
    """UIP as the only regressor (included or not), lambda = alpha = 1: 64 models."""
    return UniverseGrids(m=m, n_x=1, gamma_exog=((0.0, 1.0),))


def small_fx_grids(m: int = 9) -> UniverseGrids:
    """UIP always included, constant coefficients: 32 models."""
    return UniverseGrids(m=m, n_x=1, gamma_exog=((1.0,),))


def large_fx_grids(m: int = 9) -> UniverseGrids:
    """UIP, interest differential and stock growth (asset specific), gold (common),
    each in or out, lambda in {0.5, 0.7, 0.9, 1}: 2048 models."""
    return UniverseGrids(
        m=m, n_x=3, n_xx=1, gamma_exog=((0.0, 1.0),) * 4, lam=(0.5, 0.7, 0.9, 1.0)
    )


def universe_panel(specs: Sequence[TvpVarSpec], Y, asset=None, common=None, calibration: int = 0,
                   sigma0: Optional[np.ndarray] = None) -> ForecastPanel:
    """Run every model on the same sample and collect the one-step forecasts as a panel.

    All models are aligned on the latest start date required by any lag length.
    Sigma_0 defaults to the sample covariance of the first ``calibration`` rows.
    """
    Y = np.asarray(Y, dtype=float)
    if sigma0 is None:
        sigma0 = calibrate_sigma(Y, calibration) if calibration >= 2 else np.eye(Y.shape[1])
    start = max(max(s.p, 1 if (s.n_x or s.n_xx) else 0) for s in specs)
    columns = []
    for spec in specs:
        X, targets = var_design(spec, Y, asset, common)
        offset = start - (Y.shape[0] - targets.shape[0])
        dens, _, _ = run_filter(spec, X, targets, sigma0)
        columns.append(dens[offset:])
    rows = [list(r) for r in zip(*columns)]
    names = [f"tvp{i}" for i in range(len(specs))]
    return ForecastPanel(rows, Y[start:], model_names=names)


def simulate_tvp_var(spec: TvpVarSpec, T: int, state_sd: float, seed, sigma=None):
    """Data from the measurement/state equations with random-walk coefficients.

    Coefficients start at a stable draw (own-lag 0.3, others small); returns
    (Y, true beta path of shape (T, k)).
    """
    rng = np.random.default_rng(seed)
    m, p = spec.m, spec.p
    sigma = np.eye(m) * 0.1 if sigma is None else np.asarray(sigma, dtype=float)
    chol = np.linalg.cholesky(sigma)
    active = np.diag(minnesota_prior(spec)) > 0
    beta = np.where(active, 0.05 * rng.standard_normal(spec.k), 0.0)
    Y = np.zeros((T + p, m))
    betas = np.zeros((T, spec.k))
    for t in range(T):
        X = regressor_matrix(spec, Y[t : t + p][::-1]) if p else regressor_matrix(spec, np.zeros((0, m)))
        Y[t + p] = X @ beta + chol @ rng.standard_normal(m)
        betas[t] = beta
        beta = beta + np.where(active, state_sd * rng.standard_normal(spec.k), 0.0)
        # keep the lag coefficients inside a stable region
        beta = np.clip(beta, -0.6, 0.6)
    return Y, betas
