"""Synthetic forecasting panels with regime-switching levels.

Outcome:     y_t = mu_t + x_t + sigma_y * eps_t
Long run:    x_t = phi_x * x_{t-1} + sigma_x * v_t
Forecaster:  z_kt = x_t + sigma_obs_k * nu_kt,  predictive density N(eta_k + z_kt, sigma_y^2)

Random draws come from ``numpy.random.default_rng`` (PCG64) in a fixed order:
x path, observation noise (T x K), outcome noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .panel import ForecastPanel

SCHEDULE_LENGTH = 2001

# first matching case wins; gaps fall through to -1
_FIXED_SCHEDULE = (
    (0.0, ((0, 49), (200, 399), (800, 849), (970, 979), (1000, 1049), (1600, 1650), (1700, 2001))),
    (1.0, ((100, 150), (900, 949), (960, 969), (990, 999), (1050, 1099), (1200, 1599), (1700, 1749))),
)


@dataclass(frozen=True)
class DgpParams:
    phi_x: float = 0.9
    sigma_x: float = 0.3
    sigma_y: float = 0.3
    sigma_obs: tuple = (0.1,) * 20
    eta: tuple = tuple(-2 + 0.2105 * k for k in range(20))
    T: int = 2001

    def __post_init__(self):
        object.__setattr__(self, "sigma_obs", tuple(float(s) for s in np.atleast_1d(self.sigma_obs)))
        object.__setattr__(self, "eta", tuple(float(e) for e in np.atleast_1d(self.eta)))
        if not abs(self.phi_x) < 1:
            raise ValueError("phi_x must satisfy |phi_x| < 1")
        if self.sigma_x < 0 or self.sigma_y <= 0:
            raise ValueError("sigma_x must be >= 0 and sigma_y > 0")
        if any(s < 0 for s in self.sigma_obs):
            raise ValueError("observation noise scales must be nonnegative")
        if len(self.sigma_obs) != len(self.eta):
            raise ValueError("sigma_obs and eta must have one entry per forecaster")
        if self.T < 1:
            raise ValueError("T must be positive")

    @property
    def K(self) -> int:
        return len(self.eta)


def study_params(T: int = SCHEDULE_LENGTH, K: int = 20) -> DgpParams:
    """Default settings; other pool sizes spread the biases evenly over [-2, 2]."""
    step = 0.2105 if K == 20 else (4.0 / (K - 1) if K > 1 else 0.0)
    return DgpParams(
        phi_x=0.9,
        sigma_x=0.3,
        sigma_y=0.3,
        sigma_obs=(0.1,) * K,
        eta=tuple(-2 + step * k for k in range(K)),
        T=T,
    )


@dataclass(frozen=True)
class MarkovLevelSpec:
    states: tuple
    transition: Callable[[int], np.ndarray]

    def matrix(self, t: int) -> np.ndarray:
        Q = np.asarray(self.transition(t), dtype=float)
        n = len(self.states)
        if Q.shape != (n, n) or np.any(Q < 0) or np.any(np.abs(Q.sum(axis=1) - 1) > 1e-12):
            raise ValueError(f"transition matrix at t={t} is not row-stochastic")
        return Q


def _symmetric_q(stay: float, n: int = 3) -> np.ndarray:
    move = (1 - stay) / (n - 1)
    return np.full((n, n), move) + (stay - move) * np.eye(n)


Q_CONSTANT = _symmetric_q(0.990)
Q_AFTER_BREAK = _symmetric_q(0.980)


def constant_markov_spec() -> MarkovLevelSpec:
    return MarkovLevelSpec((-1.0, 0.0, 1.0), lambda t: Q_CONSTANT)


def time_varying_markov_spec(break_at: int = 1000) -> MarkovLevelSpec:
    return MarkovLevelSpec((-1.0, 0.0, 1.0), lambda t: Q_CONSTANT if t < break_at else Q_AFTER_BREAK)


@dataclass(eq=False)
class SimPanel:
    panel: ForecastPanel
    levels: np.ndarray
    x: np.ndarray
    z: np.ndarray
    seed: Optional[int]
    params: DgpParams = field(repr=False, default=None)


def fixed_level_path(T: int = SCHEDULE_LENGTH) -> np.ndarray:
    """Level mu_t for t = 0 .. T - 1 from the fixed regime schedule."""
    if not 0 < T <= SCHEDULE_LENGTH:
        raise ValueError(f"fixed schedule covers T <= {SCHEDULE_LENGTH}, got {T}")
    mu = np.full(T, -1.0)
    assigned = np.zeros(T, dtype=bool)
    t = np.arange(T)
    for value, intervals in _FIXED_SCHEDULE:
        for lo, hi in intervals:
            hit = (t >= lo) & (t <= hi) & ~assigned
            mu[hit] = value
            assigned |= hit
    return mu


def markov_level_path(spec: MarkovLevelSpec, T: int, seed) -> np.ndarray:
    """Markov chain over ``spec.states``; uniform initial state, ``Q_t`` drives the move into t."""
    rng = np.random.default_rng(seed)
    states = np.asarray(spec.states, dtype=float)
    n = states.size
    u = rng.random(T)
    idx = np.empty(T, dtype=int)
    idx[0] = min(int(u[0] * n), n - 1)
    for t in range(1, T):
        cdf = np.cumsum(spec.matrix(t)[idx[t - 1]])
        idx[t] = min(int(np.searchsorted(cdf, u[t], side="right")), n - 1)
    return states[idx]


def simulate_panel(params: DgpParams, levels, seed) -> SimPanel:
    levels = np.asarray(levels, dtype=float)
    T, K = params.T, params.K
    if levels.shape != (T,):
        raise ValueError(f"levels must have length T={T}")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(T)
    x = np.empty(T)
    x[0] = params.sigma_x / np.sqrt(1 - params.phi_x**2) * v[0]
    for t in range(1, T):
        x[t] = params.phi_x * x[t - 1] + params.sigma_x * v[t]
    nu = rng.standard_normal((T, K))
    eps = rng.standard_normal(T)
    z = x[:, None] + np.asarray(params.sigma_obs) * nu
    y = levels + x + params.sigma_y * eps
    means = np.asarray(params.eta) + z
    panel = ForecastPanel.gaussian(
        means, params.sigma_y**2, y, model_names=[f"f{k + 1}" for k in range(K)]
    )
    return SimPanel(panel, levels, x, z, seed if isinstance(seed, int) else None, params)


def seeded_streams(seed: int, n: int = 2) -> list:
    """Independent child seeds (levels, panel) derived from one integer seed."""
    return np.random.SeedSequence(seed).spawn(n)


LEVEL_KINDS = ("fixed", "markov_constant", "markov_time_varying")


def study_panel(levels: str, seed: int, params: Optional[DgpParams] = None) -> SimPanel:
    """One replication of the simulation study: level path and panel from ``seed``."""
    params = params or study_params()
    level_seed, panel_seed = seeded_streams(seed)
    if levels == "fixed":
        path = fixed_level_path(params.T)
    elif levels == "markov_constant":
        path = markov_level_path(constant_markov_spec(), params.T, level_seed)
    elif levels == "markov_time_varying":
        path = markov_level_path(time_varying_markov_spec(), params.T, level_seed)
    else:
        raise ValueError(f"unknown level path {levels!r}; choose from {LEVEL_KINDS}")
    return simulate_panel(params, path, panel_seed)
