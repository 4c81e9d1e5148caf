"""Predictive densities used by every combiner.

All densities are immutable. Mixtures are flattened when they are built, so a
mixture never holds another mixture as a component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.special import gammaln

LOG_2PI = math.log(2.0 * math.pi)
WEIGHT_ATOL = 1e-12


def logsumexp(a, axis=None, keepdims=False):
    """log(sum(exp(a))) with a max shift; slices that are all -inf give -inf."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out


class DensityError(ValueError):
    """Raised for invalid density parameters or evaluation inputs."""


@dataclass(frozen=True)
class Gaussian:
    mean: float
    variance: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.variance)):
            raise DensityError("Gaussian parameters must be finite")
        if self.variance <= 0:
            raise DensityError(f"Gaussian variance must be positive, got {self.variance}")

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class StudentT:
    """Location-scale Student-t; ``dof > 2`` so the variance exists."""

    location: float
    scale: float
    dof: float = 20.0

    def __post_init__(self):
        if self.scale <= 0:
            raise DensityError(f"Student-t scale must be positive, got {self.scale}")
        if not self.dof > 2:
            raise DensityError(f"Student-t dof must exceed 2, got {self.dof}")

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class MvGaussian:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DensityError(
                f"covariance shape {cov.shape} does not match mean of length {mean.size}"
            )
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
            raise DensityError("covariance must be symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        # factorise now so a bad covariance fails at construction
        _ = self.cholesky

    @property
    def dim(self) -> int:
        return self.mean.size

    @cached_property
    def cholesky(self) -> np.ndarray:
        return cholesky_with_jitter(self.covariance)


@dataclass(frozen=True, eq=False)
class Mixture:
    weights: np.ndarray
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        components = tuple(self.components)
        if weights.size != len(components) or not components:
            raise DensityError("mixture needs one weight per component")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DensityError("mixture weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_ATOL:
            raise DensityError(f"mixture weights sum to {weights.sum()!r}, expected 1")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise DensityError(f"mixture components have different dimensions {dims}")
        # eager flattening of nested mixtures
        if any(isinstance(c, Mixture) for c in components):
            flat_w, flat_c = [], []
            for w, c in zip(weights, components):
                if isinstance(c, Mixture):
                    flat_w.extend(w * c.weights)
                    flat_c.extend(c.components)
                else:
                    flat_w.append(w)
                    flat_c.append(c)
            weights = np.asarray(flat_w)
            components = tuple(flat_c)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def dim(self) -> int:
        return self.components[0].dim


PredictiveDensity = Union[Gaussian, StudentT, MvGaussian, Mixture]


def cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Cholesky factor; one retry with ``1e-10 * trace / m`` added to the diagonal."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    m = cov.shape[0]
    jitter = 1e-10 * max(np.trace(cov), 0.0) / m
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(m))
    except np.linalg.LinAlgError:
        raise DensityError("covariance is not positive definite") from None


def _gaussian_logpdf(y, mean, variance):
    return -0.5 * (LOG_2PI + np.log(variance) + (y - mean) ** 2 / variance)


def _student_t_logpdf(y, loc, scale, dof):
    z = (y - loc) / scale
    return (
        gammaln(0.5 * (dof + 1.0))
        - gammaln(0.5 * dof)
        - 0.5 * np.log(dof * math.pi)
        - np.log(scale)
        - 0.5 * (dof + 1.0) * np.log1p(z * z / dof)
    )


def _check_scalar(d, y) -> float:
    arr = np.asarray(y, dtype=float)
    if arr.size != 1:
        raise DensityError(f"univariate density evaluated at value of size {arr.size}")
    return float(arr.reshape(()))


def log_density(d: PredictiveDensity, y) -> float:
    """Log of the density ``d`` evaluated at the realisation ``y``."""
    if isinstance(d, Gaussian):
        return float(_gaussian_logpdf(_check_scalar(d, y), d.mean, d.variance))
    if isinstance(d, StudentT):
        return float(_student_t_logpdf(_check_scalar(d, y), d.location, d.scale, d.dof))
    if isinstance(d, MvGaussian):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != d.mean.shape:
            raise DensityError(f"value of shape {y.shape} for density of dimension {d.dim}")
        L = d.cholesky
        z = np.linalg.solve(L, y - d.mean)
        return float(
            -0.5 * (d.dim * LOG_2PI + z @ z) - np.sum(np.log(np.diag(L)))
        )
    if isinstance(d, Mixture):
        comp = np.array([log_density(c, y) for c in d.components])
        with np.errstate(divide="ignore"):
            return float(logsumexp(comp + np.log(d.weights)))
    raise TypeError(f"not a predictive density: {type(d).__name__}")


def moments(d: PredictiveDensity):
    """Mean and variance (covariance matrix for multivariate densities)."""
    if isinstance(d, Gaussian):
        return d.mean, d.variance
    if isinstance(d, StudentT):
        return d.location, d.scale**2 * d.dof / (d.dof - 2.0)
    if isinstance(d, MvGaussian):
        return d.mean.copy(), d.covariance.copy()
    if isinstance(d, Mixture):
        parts = [moments(c) for c in d.components]
        w = d.weights
        if d.dim == 1 and not isinstance(d.components[0], MvGaussian):
            means = np.array([p[0] for p in parts])
            variances = np.array([p[1] for p in parts])
            mean = float(w @ means)
            # law of total variance
            return mean, float(w @ variances + w @ (means - mean) ** 2)
        means = np.array([np.atleast_1d(p[0]) for p in parts])
        covs = np.array([np.atleast_2d(p[1]) for p in parts])
        mean = w @ means
        dev = means - mean
        cov = np.einsum("j,jab->ab", w, covs) + np.einsum("j,ja,jb->ab", w, dev, dev)
        return mean, cov
    raise TypeError(f"not a predictive density: {type(d).__name__}")


def mixture(weights: Sequence[float], components: Sequence[PredictiveDensity]) -> PredictiveDensity:
    """Normalised, flattened mixture; zero-weight components are dropped.

    A single surviving component is returned as-is.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != len(components):
        raise DensityError(f"{w.size} weights for {len(components)} components")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DensityError("mixture weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise DensityError("mixture weights are all zero")
    keep = np.flatnonzero(w > 0)
    w = w[keep] / total
    comps = [components[i] for i in keep]
    if len(comps) == 1:
        return comps[0]
    return Mixture(w / w.sum(), tuple(comps))
