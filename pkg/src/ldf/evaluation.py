"""Forecast scoring and economic evaluation.

Statistical: mean log score (MLS), cumulative log score and log predictive
density ratios (LPDR). Economic: volatility-targeted long-short portfolios with
turnover costs, Sharpe ratios, wealth curves and the focused Sharpe score.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import CustomScore
from .density import DensityError, cholesky_with_jitter, moments

STD_FLOOR = 1e-12


class DegenerateWarning(UserWarning):
    pass


def mls(scores, s: int = 0) -> float:
    """Mean of ``scores[s:]`` (periods s+1..T in one-based time)."""
    scores = np.asarray(scores, dtype=float)
    if not 0 <= s < scores.size:
        raise ValueError(f"calibration length {s} outside [0, {scores.size})")
    return float(np.sum(scores[s:]) / (scores.size - s))


def lpdr(scores, ref_scores, s: int = 0) -> np.ndarray:
    """Running sum of ``scores - ref_scores`` from period s+1; entry i is LPDR(s+1+i)."""
    a = np.asarray(scores, dtype=float)
    b = np.asarray(ref_scores, dtype=float)
    if a.shape != b.shape:
        raise ValueError("score series must have the same length")
    if not 0 <= s < a.size:
        raise ValueError(f"calibration length {s} outside [0, {a.size})")
    return np.cumsum(a[s:] - b[s:])


@dataclass
class EvalReport:
    scores: dict
    s: int = 0
    reference: Optional[str] = None

    def mls(self, name: str) -> float:
        return mls(self.scores[name], self.s)

    def cumulative(self, name: str) -> float:
        return float(np.sum(np.asarray(self.scores[name])[self.s :]))

    def lpdr(self, name: str) -> np.ndarray:
        if self.reference is None:
            raise ValueError("no reference method set")
        return lpdr(self.scores[name], self.scores[self.reference], self.s)

    def table(self) -> list:
        return [
            {"method": k, "mls": self.mls(k), "sum_log_p": self.cumulative(k)} for k in self.scores
        ]


def summarize_runs(per_seed: dict, s: int = 0) -> list:
    """Rows of mean/sd of MLS and of the cumulative log score across seeds.

    ``per_seed[method]`` is a list of score series, one per seed; the sd uses
    the n - 1 denominator.
    """
    rows = []
    for method, runs in per_seed.items():
        m = np.array([mls(r, s) for r in runs])
        c = np.array([float(np.sum(np.asarray(r)[s:])) for r in runs])
        ddof = 1 if len(runs) > 1 else 0
        rows.append(
            {
                "method": method,
                "mean_mls": float(m.mean()),
                "sd_mls": float(m.std(ddof=ddof)),
                "mean_sum_log_p": float(c.mean()),
                "sd_sum_log_p": float(c.std(ddof=ddof)),
                "runs": len(runs),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# portfolios


@dataclass(frozen=True)
class PortfolioConfig:
    target_vol: float = 0.1
    transaction_cost: float = 0.0008
    periods_per_year: int = 12
    sharpe_window: int = 12

    def __post_init__(self):
        if self.target_vol <= 0 or self.transaction_cost < 0:
            raise ValueError("target_vol must be positive and transaction_cost nonnegative")
        if self.periods_per_year < 1 or self.sharpe_window < 2:
            raise ValueError("periods_per_year must be >= 1 and sharpe_window >= 2")

    @property
    def period_vol(self) -> float:
        return self.target_vol / np.sqrt(self.periods_per_year)


def portfolio_weights(mu, sigma, config: PortfolioConfig) -> np.ndarray:
    """Maximise expected return subject to predicted per-period vol ``config.period_vol``.

    Closed form ``w = sigma_p * S^-1 mu / sqrt(mu' S^-1 mu)``; positions may be long or short.
    A zero mean gives a flat (all-zero) position and a ``DegenerateWarning``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape != (mu.size, mu.size):
        raise ValueError(f"covariance shape {sigma.shape} does not match {mu.size} assets")
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise DensityError("return covariance is not positive definite") from None
    if not np.any(mu):
        warnings.warn("zero expected returns: flat position", DegenerateWarning, stacklevel=2)
        return np.zeros_like(mu)
    # S^-1 mu via the Cholesky factor
    x = np.linalg.solve(L.T, np.linalg.solve(L, mu))
    q = float(mu @ x)
    return config.period_vol / np.sqrt(q) * x


@dataclass
class BacktestResult:
    weights: np.ndarray
    gross_returns: np.ndarray
    costs: np.ndarray
    net_returns: np.ndarray
    wealth: np.ndarray
    sharpe: float
    gross_sharpe: float
    zero_std: bool
    flat_periods: list = field(default_factory=list)


def sharpe_ratio(returns, periods_per_year: int = 12):
    """Annualised Sharpe ratio and a flag set when the return sd is zero (ratio is NaN)."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        return float("nan"), True
    sd = r.std(ddof=1)
    if sd == 0:
        return float("nan"), True
    return float(r.mean() / sd * np.sqrt(periods_per_year)), False


def backtest_weights(weights, realized_returns, config: PortfolioConfig) -> BacktestResult:
    """Apply a weight path to realised returns; costs are tau * sum|w_t - w_{t-1}|, w_0 = 0."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    R = np.asarray(realized_returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    if W.shape != R.shape:
        raise ValueError(f"weights {W.shape} and returns {R.shape} do not line up")
    gross = np.einsum("ta,ta->t", W, R)
    turnover = np.abs(np.diff(W, axis=0, prepend=np.zeros((1, W.shape[1])))).sum(axis=1)
    costs = config.transaction_cost * turnover
    net = gross - costs
    wealth = np.cumprod(1.0 + net)
    sharpe, zero_std = sharpe_ratio(net, config.periods_per_year)
    gross_sharpe, _ = sharpe_ratio(gross, config.periods_per_year)
    return BacktestResult(W, gross, costs, net, wealth, sharpe, gross_sharpe, zero_std)


def portfolio_backtest(selected_densities: Sequence, realized_returns, config: PortfolioConfig) -> BacktestResult:
    """Backtest the vol-targeted portfolio implied by a sequence of return forecasts."""
    R = np.asarray(realized_returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    if len(selected_densities) != R.shape[0]:
        raise ValueError("one forecast per period required")
    W = np.zeros(R.shape)
    flat = []
    for t, d in enumerate(selected_densities):
        if d.dim != R.shape[1]:
            raise ValueError(f"forecast at {t} has dimension {d.dim}, returns have {R.shape[1]}")
        mu, sigma = moments(d)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateWarning)
            W[t] = portfolio_weights(mu, sigma, config)
        if caught:
            flat.append(t)
    res = backtest_weights(W, R, config)
    res.flat_periods = flat
    return res


def focused_score(portfolio_returns, window: int, return_flags: bool = False):
    """Return divided by its rolling standard deviation over the last ``window`` periods.

    Early periods use all available history. The first period has no dispersion
    estimate and scores 0. Standard deviations below 1e-12 are floored and flagged.
    """
    r = np.asarray(portfolio_returns, dtype=float)
    if window < 2:
        raise ValueError("window must be at least 2")
    if r.size < 2:
        raise ValueError("focused score needs at least two returns")
    out = np.zeros(r.size)
    flags = np.zeros(r.size, dtype=bool)
    flags[0] = True
    for t in range(1, r.size):
        sd = r[max(0, t - window + 1) : t + 1].std(ddof=1)
        if sd < STD_FLOOR:
            sd = STD_FLOOR
            flags[t] = True
        out[t] = r[t] / sd
    return (out, flags) if return_flags else out


class _FocusedSharpeTracker:
    """Per-series state: previous weights and recent net returns."""

    def __init__(self, config: PortfolioConfig, window: int):
        self.config = config
        self.history = deque(maxlen=window)
        self.prev_w = None

    def __call__(self, density, y) -> float:
        mu, sigma = moments(density)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateWarning)
            w = portfolio_weights(mu, sigma, self.config)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        prev = np.zeros_like(w) if self.prev_w is None else self.prev_w
        r = float(w @ y) - self.config.transaction_cost * float(np.abs(w - prev).sum())
        self.prev_w = w
        self.history.append(r)
        if len(self.history) < 2:
            return 0.0
        sd = max(float(np.std(self.history, ddof=1)), STD_FLOOR)
        return r / sd


def focused_sharpe_score(config: PortfolioConfig = PortfolioConfig(), window: Optional[int] = None) -> CustomScore:
    """Score for layer stacks: net portfolio return over its rolling sd, tracked per series."""
    window = window or config.sharpe_window
    return CustomScore(lambda: _FocusedSharpeTracker(config, window), stateful=True)


def cholesky_ok(sigma) -> bool:
    try:
        cholesky_with_jitter(np.asarray(sigma, dtype=float))
        return True
    except DensityError:
        return False
