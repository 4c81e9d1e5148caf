"""Loss discounting framework: discounted scores, layer operators and layer stacks.

A layer holds one meta-model per discount factor in its grid. Meta-model ``m`` of
layer ``n`` weights the members of layer ``n - 1`` (the base models when
``n = 1``) by applying the layer operator to their discounted cumulative scores,

    L[t + 1] = alpha_m * (L[t] + S[t]),    L[1] = 0,

so the most recent score carries weight ``alpha_m``. With a weight floor
``c > 0`` the carried-over state is first re-based to the floored log weights,
``log((softmax(L) + c) / (1 + J c))``, which is the DMA forgetting step; with
``c = 0`` this is only a constant shift and ``L`` is the plain discounted sum.
A one-layer softmax stack with grid ``{alpha}`` is exactly dynamic model
averaging, and an argmax layer selects the member with the highest DMA
probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .density import PredictiveDensity, log_density, logsumexp, mixture
from .panel import ForecastPanel

SOFTMAX = "softmax"
ARGMAX = "argmax"
DEFAULT_GRID = (1.0, 0.99, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.001)
DEFAULT_C = 1e-20

_OP_CODES = {"s": SOFTMAX, "a": ARGMAX}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scores


@dataclass(frozen=True)
class LogScore:
    """Logarithmic score, log p(y)."""

    def scorer(self) -> Callable[[PredictiveDensity, object], float]:
        return log_density


@dataclass(frozen=True)
class CustomScore:
    """User score (higher is better).

    With ``stateful=True`` ``fn`` is a zero-argument factory returning a fresh
    scoring callable for every scored series, so scores may depend on the
    series' own history (rolling-window scores).
    """

    fn: Callable
    stateful: bool = False

    def scorer(self) -> Callable[[PredictiveDensity, object], float]:
        return self.fn() if self.stateful else self.fn


ScoreFunction = Union[LogScore, CustomScore]


# ---------------------------------------------------------------------------
# primitives


def ldpl_update(prev, score, alpha):
    """One step of the discounted score recursion, ``alpha * (prev + score)``."""
    prev = np.asarray(prev, dtype=float)
    score = np.asarray(score, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if not (np.all(np.isfinite(prev)) and np.all(np.isfinite(score))):
        raise ValueError("discounted score update needs finite inputs")
    if np.any(alpha <= 0) or np.any(alpha > 1):
        raise ValueError("discount factors must lie in (0, 1]")
    out = alpha * (prev + score)
    return float(out) if out.ndim == 0 else out


def softmax_weights(ldpls) -> np.ndarray:
    a = np.asarray(ldpls, dtype=float)
    if a.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    z = np.exp(a - a.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def argmax_weights(ldpls) -> np.ndarray:
    """One-hot at the maximiser; ties go to the lowest index."""
    a = np.asarray(ldpls, dtype=float)
    if a.shape[-1] == 0:
        raise ValueError("argmax of an empty vector")
    idx = np.argmax(a, axis=-1)
    out = np.zeros_like(a)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def floor_ldpl(L, c: float):
    """Re-base discounted scores onto the log of the floored weights (identity when c = 0)."""
    L = np.asarray(L, dtype=float)
    if c == 0:
        return L
    J = L.shape[-1]
    log_w = L - logsumexp(L, axis=-1, keepdims=True)
    return np.logaddexp(log_w, np.log(c)) - np.log1p(J * c)


def stabilize_weights(w, c: float) -> np.ndarray:
    """``(w + c) / sum(w + c)`` along the last axis."""
    w = np.asarray(w, dtype=float)
    if c == 0:
        return w
    return (w + c) / (w.sum(axis=-1, keepdims=True) + w.shape[-1] * c)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class LayerSpec:
    operator: str
    grid: tuple

    def __post_init__(self):
        op = _OP_CODES.get(self.operator, self.operator)
        if op not in (SOFTMAX, ARGMAX):
            raise ConfigError(f"unknown layer operator {self.operator!r}")
        grid = tuple(float(a) for a in np.atleast_1d(self.grid))
        if not grid:
            raise ConfigError("layer grid is empty")
        if any(not (0 < a <= 1) for a in grid):
            raise ConfigError(f"discount factors must lie in (0, 1], got {grid}")
        if len(set(grid)) != len(grid):
            raise ConfigError(f"duplicate discount factors in {grid}")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "grid", grid)

    @property
    def size(self) -> int:
        return len(self.grid)


@dataclass(frozen=True)
class LdfConfig:
    """Layer stack ``L_1 ... L_N``; the last layer must hold a single discount factor.

    ``convention="alpha_i"`` weights the most recent score by alpha (the
    recursion that reproduces DMA); ``"alpha_i_minus_1"`` gives it weight one.
    """

    layers: tuple
    c: float = DEFAULT_C
    score: object = field(default_factory=LogScore)
    convention: str = "alpha_i"

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ConfigError("at least one layer is required")
        if layers[-1].size != 1:
            raise ConfigError("the final layer must have a single discount factor")
        if self.c < 0:
            raise ConfigError("c must be nonnegative")
        if self.convention not in ("alpha_i", "alpha_i_minus_1"):
            raise ConfigError(f"unknown convention {self.convention!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def final_alpha(self) -> float:
        return self.layers[-1].grid[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def code(self) -> str:
        return "".join(layer.operator[0] for layer in self.layers)

    @classmethod
    def dma(cls, alpha: float, c: float = DEFAULT_C, **kw) -> "LdfConfig":
        return cls((LayerSpec(SOFTMAX, (alpha,)),), c=c, **kw)

    @classmethod
    def from_code(
        cls, code: str, alpha: float, grid: Sequence[float] = DEFAULT_GRID, c: float = DEFAULT_C, **kw
    ) -> "LdfConfig":
        """``from_code("ss", 0.8)`` is the two-layer softmax/softmax stack with final alpha 0.8."""
        if not code or any(ch not in _OP_CODES for ch in code):
            raise ConfigError(f"layer code must be a string over 's'/'a', got {code!r}")
        layers = [LayerSpec(_OP_CODES[ch], tuple(grid)) for ch in code[:-1]]
        layers.append(LayerSpec(_OP_CODES[code[-1]], (alpha,)))
        return cls(tuple(layers), c=c, **kw)

    def check_pool(self, K: int):
        if self.c * K >= 1:
            raise ConfigError(f"c={self.c} is too large for a pool of {K} members")


# ---------------------------------------------------------------------------
# traces


@dataclass(eq=False)
class LdfTrace:
    """Output of a combination run.

    ``layer_weights[n][t, m, j]`` is the weight meta-model ``m`` of layer ``n``
    gives member ``j`` of the layer below at time ``t``; ``base_weights[t]``
    is the final combination expressed over the base models.
    """

    name: str
    base_weights: np.ndarray
    scores: np.ndarray
    log_scores: np.ndarray
    panel: ForecastPanel = field(repr=False)
    layer_weights: Optional[list] = field(default=None, repr=False)
    grids: Optional[list] = None

    @property
    def T(self) -> int:
        return self.base_weights.shape[0]

    def density(self, t: int) -> PredictiveDensity:
        return mixture(self.base_weights[t], self.panel.densities[t])

    def mls(self, s: int = 0) -> float:
        from .evaluation import mls

        return mls(self.log_scores, s)

    def cumulative_log_score(self, s: int = 0) -> float:
        return float(np.sum(self.log_scores[s:]))

    def mean_alpha(self, layer: int = 0) -> np.ndarray:
        """Weight-averaged discount factor of ``layer`` as seen from the final combination."""
        if self.layer_weights is None or self.grids is None:
            raise ValueError("trace does not keep per-layer weights")
        # weight on each meta-model of `layer` implied by the layers above it
        top = np.ones((self.T, 1))
        for W in reversed(self.layer_weights[layer + 1 :]):
            top = np.einsum("tm,tmj->tj", top, W)
        return top @ np.asarray(self.grids[layer])


def flatten_weights(trace: LdfTrace, t: int) -> np.ndarray:
    """Final combination weights over the base models at time ``t``.

    Multiplies the per-layer weight matrices from the bottom layer up.
    """
    if not 0 <= t < trace.T:
        raise IndexError(f"time {t} outside trace horizon {trace.T}")
    if trace.layer_weights is None:
        return trace.base_weights[t].copy()
    flat = trace.layer_weights[0][t]
    for W in trace.layer_weights[1:]:
        flat = W[t] @ flat
    return flat[0]


# ---------------------------------------------------------------------------
# layer-major engine for the log score


def mixture_log_scores(logp, weights, axis=-1):
    """log sum_j w_j exp(logp_j), computed as a log-sum-exp of ``logp + log w``."""
    with np.errstate(divide="ignore"):
        return logsumexp(logp + np.log(weights), axis=axis)


def _discounted_scores(S: np.ndarray, grid, config: LdfConfig) -> np.ndarray:
    """L[t, m, j] for every time, discount factor and member, from scores S[t, j]."""
    T, J = S.shape
    alpha = np.asarray(grid)[:, None]
    L = np.zeros((T, alpha.size, J))
    for t in range(1, T):
        prev = floor_ldpl(L[t - 1], config.c)
        if config.convention == "alpha_i":
            L[t] = alpha * (prev + S[t - 1])
        else:
            L[t] = alpha * prev + S[t - 1]
    return L


def _layer_weights(L: np.ndarray, operator: str, c: float) -> np.ndarray:
    W = softmax_weights(L) if operator == SOFTMAX else argmax_weights(L)
    # no history yet: every operator starts from equal weights
    W[0] = 1.0 / L.shape[-1]
    return stabilize_weights(W, c)


def _stack_layer(S_prev, F_prev, layer: LayerSpec, config: LdfConfig):
    if not np.all(np.isfinite(S_prev)):
        raise FloatingPointError("non-finite score entering a discounted-score layer")
    L = _discounted_scores(S_prev, layer.grid, config)
    W = _layer_weights(L, layer.operator, config.c)
    S = mixture_log_scores(S_prev[:, None, :], W)
    F = W if F_prev is None else np.einsum("tmj,tjk->tmk", W, F_prev)
    return W, S, F


def _run_log(panel: ForecastPanel, layers, config: LdfConfig, keep_layers=True):
    S = np.asarray(panel.log_scores())
    F = None
    kept = []
    for layer in layers:
        W, S, F = _stack_layer(S, F, layer, config)
        if keep_layers:
            kept.append(W)
    return F[:, 0, :], S[:, 0], kept


def ldf_run(panel: ForecastPanel, config: LdfConfig, name: Optional[str] = None) -> LdfTrace:
    """Run a layer stack over a panel; the time-t combination uses y[:t] only."""
    config.check_pool(panel.K)
    for layer in config.layers[:-1]:
        config.check_pool(layer.size)
    name = name or f"LDF{config.depth}_{config.code}(alpha={config.final_alpha:g})"
    grids = [layer.grid for layer in config.layers]
    if isinstance(config.score, LogScore):
        base, scores, kept = _run_log(panel, config.layers, config)
        return LdfTrace(name, base, scores, scores.copy(), panel, kept, grids)

    filt = LdfFilter(config, panel.K)
    T = panel.T
    kept = [np.empty((T, layer.size, J)) for layer, J in zip(config.layers, filt.member_counts)]
    base = np.empty((T, panel.K))
    scores = np.empty(T)
    for t in range(T):
        for n, W in enumerate(filt.layer_weights()):
            kept[n][t] = W
        base[t] = filt.base_weights()
        out = filt.update(panel.densities[t], panel.y[t])
        scores[t] = out
    logp = np.asarray(panel.log_scores())
    log_scores = mixture_log_scores(logp, base)
    return LdfTrace(name, base, scores, log_scores, panel, kept, grids)


# ---------------------------------------------------------------------------
# streaming engine


class LdfFilter:
    """Online layer stack: ``forecast`` then ``update`` once per period.

    Works with any score; every scored series (base model or meta-model) gets
    its own scorer so stateful scores keep separate histories.
    """

    def __init__(self, config: LdfConfig, K: int):
        config.check_pool(K)
        self.config = config
        self.K = K
        self.member_counts = [K] + [layer.size for layer in config.layers[:-1]]
        self.ldpl = [np.zeros((layer.size, J)) for layer, J in zip(config.layers, self.member_counts)]
        self.t = 0
        self._log = isinstance(config.score, LogScore)
        self._scorers = [[config.score.scorer() for _ in range(K)]]
        for layer in config.layers:
            self._scorers.append([config.score.scorer() for _ in range(layer.size)])

    def layer_weights(self) -> list:
        out = []
        for layer, L in zip(self.config.layers, self.ldpl):
            if self.t == 0:
                W = np.full(L.shape, 1.0 / L.shape[1])
            elif layer.operator == SOFTMAX:
                W = softmax_weights(L)
            else:
                W = argmax_weights(L)
            out.append(stabilize_weights(W, self.config.c))
        return out

    def _flattened(self, weights) -> list:
        flats, F = [], None
        for W in weights:
            F = W if F is None else W @ F
            flats.append(F)
        return flats

    def base_weights(self) -> np.ndarray:
        return self._flattened(self.layer_weights())[-1][0]

    def forecast(self, densities: Sequence[PredictiveDensity]) -> PredictiveDensity:
        return mixture(self.base_weights(), densities)

    def update(self, densities: Sequence[PredictiveDensity], y) -> float:
        """Score everything on ``y``, advance the discounted scores; returns the final score."""
        if len(densities) != self.K:
            raise ValueError(f"{len(densities)} densities for a pool of {self.K}")
        weights = self.layer_weights()
        if self._log:
            S = np.array([log_density(d, y) for d in densities])
            layer_scores = [S]
            for W in weights:
                S = mixture_log_scores(S[None, :], W)
                layer_scores.append(S)
        else:
            S = np.array([f(d, y) for f, d in zip(self._scorers[0], densities)])
            layer_scores = [S]
            for n, F in enumerate(self._flattened(weights)):
                S = np.array(
                    [f(mixture(F[m], densities), y) for m, f in enumerate(self._scorers[n + 1])]
                )
                layer_scores.append(S)
        for n, layer in enumerate(self.config.layers):
            alpha = np.asarray(layer.grid)[:, None]
            score = layer_scores[n][None, :]
            prev = floor_ldpl(self.ldpl[n], self.config.c)
            if self.config.convention == "alpha_i":
                self.ldpl[n] = ldpl_update(prev, score, alpha)
            else:
                self.ldpl[n] = alpha * prev + score
        self.t += 1
        return float(layer_scores[-1][0])


# ---------------------------------------------------------------------------
# infinite depth


@dataclass(eq=False)
class InfinityResult:
    trace: LdfTrace
    depth: int
    converged: bool
    deltas: list


def ldf_infinity(
    panel: ForecastPanel,
    layer_template: LayerSpec,
    config: LdfConfig,
    tol: float = 1e-8,
    max_layers: int = 200,
) -> InfinityResult:
    """Stack copies of ``layer_template`` under the final layer of ``config`` until
    the base-model weights stop moving.

    Depth d means d - 1 template layers plus the final layer. ``deltas[i]`` is
    the sup-norm change of the base weights (over all times) from depth i + 1 to
    depth i + 2. ``depth`` is the shallowest depth whose successor moves by less
    than ``tol``; ``trace`` is the deepest stack evaluated.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_layers < 2:
        raise ValueError("max_layers must be at least 2")
    final = config.layers[-1]
    config.check_pool(panel.K)
    config.check_pool(layer_template.size)

    if isinstance(config.score, LogScore):
        S0 = np.asarray(panel.log_scores())

        def top(S, F):
            _, S_fin, F_fin = _stack_layer(S, F, final, config)
            return F_fin[:, 0, :], S_fin[:, 0]

        S, F = S0, None
        prev_base, prev_scores = top(S, F)
        deltas = []
        for d in range(2, max_layers + 1):
            _, S, F = _stack_layer(S, F, layer_template, config)
            base, scores = top(S, F)
            deltas.append(float(np.max(np.abs(base - prev_base))))
            prev_base, prev_scores = base, scores
            if deltas[-1] < tol:
                break
        log_scores = prev_scores
    else:
        deltas, prev_base = [], None
        for d in range(1, max_layers + 1):
            cfg = LdfConfig((layer_template,) * (d - 1) + (final,), config.c, config.score, config.convention)
            tr = ldf_run(panel, cfg)
            if prev_base is not None:
                deltas.append(float(np.max(np.abs(tr.base_weights - prev_base))))
                if deltas[-1] < tol:
                    break
            prev_base = tr.base_weights
        prev_base, log_scores = tr.base_weights, tr.log_scores

    converged = bool(deltas) and deltas[-1] < tol
    depth = len(deltas) if converged else len(deltas) + 1
    code = layer_template.operator[0] * 2 + "..."
    name = f"LDFinf_{code}(alpha={final.grid[0]:g})"
    scores = log_scores
    if not isinstance(config.score, LogScore):
        scores = tr.scores
    trace = LdfTrace(name, prev_base, scores, log_scores, panel, None, None)
    return InfinityResult(trace, depth, converged, deltas)
