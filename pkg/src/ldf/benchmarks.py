"""Reference combiners: DMA, BMA, DML, simple average, best-N and the EWMA random walk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LdfTrace, mixture_log_scores
from .density import Gaussian, MvGaussian, logsumexp
from .panel import ForecastPanel


@dataclass(frozen=True)
class BestNConfig:
    n: int
    window: int

    def __post_init__(self):
        if self.n < 1 or self.window < 1:
            raise ValueError("best-N needs n >= 1 and window >= 1")


@dataclass(frozen=True)
class EwmaRwConfig:
    decay: float = 0.97
    initial_variance: float = 1.0

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise ValueError("EWMA decay must lie in (0, 1)")
        if self.initial_variance <= 0:
            raise ValueError("EWMA initial variance must be positive")


def _trace(name, panel: ForecastPanel, weights: np.ndarray) -> LdfTrace:
    logp = np.asarray(panel.log_scores())
    scores = mixture_log_scores(logp, weights)
    return LdfTrace(name, weights, scores, scores.copy(), panel, [weights[:, None, :]], None)


def dma_run(panel: ForecastPanel, alpha: float, c: float = 0.0) -> LdfTrace:
    """Dynamic model averaging by its two-step recursion, in log space.

    Update:   pi[t|t]   ~ pi[t|t-1] * p_k(y_t)
    Forecast: pi[t+1|t] = (q + c) / (1 + K c),  q = pi[t|t]^alpha / sum(pi[t|t]^alpha)
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if c < 0:
        raise ValueError("c must be nonnegative")
    logp = np.asarray(panel.log_scores())
    if not np.all(np.isfinite(logp)):
        raise FloatingPointError("non-finite predictive log-likelihood in panel")
    T, K = logp.shape
    weights = np.empty((T, K))
    pi = np.full(K, 1.0 / K)
    for t in range(T):
        weights[t] = pi
        with np.errstate(divide="ignore"):
            post = np.log(pi) + logp[t]
        post -= logsumexp(post)
        q = alpha * post
        q -= logsumexp(q)
        # floor in probability space so every weight is at least c / (1 + K c)
        pi = (np.exp(q) + c) / (1.0 + K * c)
    return _trace(f"DMA(alpha={alpha:g})", panel, weights)


def bma_run(panel: ForecastPanel) -> LdfTrace:
    tr = dma_run(panel, 1.0, 0.0)
    tr.name = "BMA"
    return tr


def dml_run(panel: ForecastPanel, grid, final_alpha: float = 1.0) -> LdfTrace:
    """Dynamic model learning: per discount factor pick the model with the highest
    DMA probability, then pick the discount factor whose picks have the highest
    discounted cumulative log score (plain sum when ``final_alpha`` is 1).

    The first period has no history and uses equal weights.
    """
    logp = np.asarray(panel.log_scores())
    T, K = logp.shape
    grid = np.asarray(grid, dtype=float)
    M = grid.size
    log_pi = np.full((M, K), -np.log(K))
    perf = np.zeros(M)
    weights = np.empty((T, K))
    for t in range(T):
        if t == 0:
            weights[t] = 1.0 / K
            pick_scores = np.full(M, logsumexp(logp[t]) - np.log(K))
        else:
            picks = np.argmax(log_pi, axis=1)
            best = int(np.argmax(perf))
            weights[t] = 0.0
            weights[t, picks[best]] = 1.0
            pick_scores = logp[t, picks]
        post = log_pi + logp[t]
        post -= logsumexp(post, axis=1, keepdims=True)
        log_pi = grid[:, None] * post
        log_pi -= logsumexp(log_pi, axis=1, keepdims=True)
        perf = final_alpha * (perf + pick_scores)
    return _trace(f"DML(alpha={final_alpha:g})", panel, weights)


def simple_average_run(panel: ForecastPanel) -> LdfTrace:
    weights = np.full((panel.T, panel.K), 1.0 / panel.K)
    return _trace("Average", panel, weights)


def best_n_run(panel: ForecastPanel, config: BestNConfig) -> LdfTrace:
    """Equal-weight mixture of the n models with the best mean log score over the
    last ``window`` observed periods (all available periods while warming up)."""
    if config.n > panel.K:
        raise ValueError(f"best-N with n={config.n} exceeds the pool size {panel.K}")
    logp = np.asarray(panel.log_scores())
    T, K = logp.shape
    weights = np.zeros((T, K))
    for t in range(T):
        lo = max(0, t - config.window)
        mean = logp[lo:t].mean(axis=0) if t > 0 else np.zeros(K)
        # stable sort on the negated score keeps lowest index first among ties
        top = np.argsort(-mean, kind="stable")[: config.n]
        weights[t, top] = 1.0 / config.n
    return _trace(f"Best-{config.n}(rw={config.window})", panel, weights)


def ewma_variances(returns, decay: float, initial_variance: float) -> np.ndarray:
    """sigma2[0] = initial_variance, sigma2[t+1] = decay * sigma2[t] + (1 - decay) * r[t]^2."""
    r = np.asarray(returns, dtype=float)
    out = np.empty(r.shape[0])
    s2 = initial_variance
    for t in range(r.shape[0]):
        out[t] = s2
        s2 = decay * s2 + (1 - decay) * r[t] ** 2
    return out


def ewma_covariances(returns, decay: float, initial_covariance) -> np.ndarray:
    """Matrix version of :func:`ewma_variances` for a T x m return panel."""
    r = np.asarray(returns, dtype=float)
    S = np.atleast_2d(np.asarray(initial_covariance, dtype=float)).copy()
    out = np.empty((r.shape[0],) + S.shape)
    for t in range(r.shape[0]):
        out[t] = S
        S = decay * S + (1 - decay) * np.outer(r[t], r[t])
    return out


def ewma_rw_densities(returns, config: EwmaRwConfig, initial_covariance=None) -> list:
    """Zero-mean random walk forecasts with EWMA variance; entry t forecasts returns[t].

    For a T x m panel the forecasts are MvGaussian with an EWMA covariance,
    started at ``initial_covariance`` (default ``initial_variance * I``).
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim == 1:
        return [Gaussian(0.0, float(v)) for v in ewma_variances(r, config.decay, config.initial_variance)]
    m = r.shape[1]
    S0 = config.initial_variance * np.eye(m) if initial_covariance is None else initial_covariance
    return [MvGaussian(np.zeros(m), S) for S in ewma_covariances(r, config.decay, S0)]


def calibrated_initial_variance(returns, prefix: int):
    """Sample variance (covariance matrix for a panel) of the first ``prefix`` observations."""
    r = np.asarray(returns, dtype=float)[:prefix]
    if r.shape[0] < 2:
        raise ValueError("calibration prefix needs at least two observations")
    if r.ndim == 1:
        return float(np.var(r, ddof=1))
    return np.atleast_2d(np.cov(r, rowvar=False))
