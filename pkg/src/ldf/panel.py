"""Forecast panels: a T x K grid of one-step-ahead predictive densities plus outcomes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .density import DensityError, Gaussian, PredictiveDensity, log_density, mixture


class PanelError(ValueError):
    pass


@dataclass(eq=False)
class ForecastPanel:
    """``densities[t][k]`` is model k's forecast of ``y[t]`` issued at t - 1."""

    densities: Sequence[Sequence[PredictiveDensity]]
    y: np.ndarray
    model_names: Optional[list] = None
    _gaussian: Optional[tuple] = field(default=None, repr=False)
    _log_scores: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim not in (1, 2):
            raise PanelError("realisations must be a vector or a T x m matrix")
        T = self.y.shape[0]
        if len(self.densities) != T:
            raise PanelError(f"{len(self.densities)} density rows for {T} realisations")
        if T == 0:
            raise PanelError("empty panel")
        K = len(self.densities[0])
        if K == 0:
            raise PanelError("panel has no models")
        dim = 1 if self.y.ndim == 1 else self.y.shape[1]
        for t, row in enumerate(self.densities):
            if len(row) != K:
                raise PanelError(f"row {t} has {len(row)} densities, expected {K}")
            for k, d in enumerate(row):
                if d.dim != dim:
                    raise PanelError(
                        f"density ({t}, {k}) has dimension {d.dim}, realisations have {dim}"
                    )
        if self.model_names is None:
            self.model_names = [f"m{k}" for k in range(K)]
        elif len(self.model_names) != K:
            raise PanelError("one model name per column required")

    @classmethod
    def gaussian(cls, means, variances, y, model_names=None) -> "ForecastPanel":
        """Panel of univariate Gaussian forecasts from T x K arrays."""
        means = np.asarray(means, dtype=float)
        variances = np.broadcast_to(np.asarray(variances, dtype=float), means.shape)
        if means.ndim != 2:
            raise PanelError("means must be a T x K array")
        if np.any(variances <= 0):
            raise DensityError("Gaussian variance must be positive")
        rows = [
            [Gaussian(float(m), float(v)) for m, v in zip(mr, vr)]
            for mr, vr in zip(means, variances)
        ]
        return cls(rows, y, model_names=model_names, _gaussian=(means, np.array(variances)))

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return len(self.densities[0])

    def log_scores(self) -> np.ndarray:
        """T x K matrix of log predictive densities at the realisations."""
        if self._log_scores is None:
            if self._gaussian is not None:
                mu, var = self._gaussian
                out = -0.5 * (np.log(2 * np.pi * var) + (self.y[:, None] - mu) ** 2 / var)
            else:
                out = np.array(
                    [[log_density(d, self.y[t]) for d in row] for t, row in enumerate(self.densities)]
                )
            out.setflags(write=False)
            self._log_scores = out
        return self._log_scores

    def combine(self, t: int, weights) -> PredictiveDensity:
        return mixture(weights, self.densities[t])

    def truncated(self, start: int, stop: int) -> "ForecastPanel":
        g = None
        if self._gaussian is not None:
            g = (self._gaussian[0][start:stop], self._gaussian[1][start:stop])
        return ForecastPanel(
            list(self.densities[start:stop]), self.y[start:stop], list(self.model_names), _gaussian=g
        )

    def with_realisations(self, y) -> "ForecastPanel":
        return ForecastPanel(self.densities, y, list(self.model_names), _gaussian=self._gaussian)
