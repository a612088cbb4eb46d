"""Parameter models: scalar priors and Gaussian random fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from ..errors import ConfigurationError, UnsupportedPriorError
from ..geometry import as_points
from ..kernels import KernelSpec, kernel_matrix


@dataclass(frozen=True)
class LogGaussian:
    """``log theta ~ N(mean, sd^2)``."""

    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigurationError("log-Gaussian prior needs sd > 0")

    def logpdf(self, theta) -> float:
        theta = float(theta)
        if theta <= 0:
            return -np.inf
        return float(stats.norm.logpdf(np.log(theta), self.mean, self.sd) - np.log(theta))

    def support(self):
        return 0.0, np.inf


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigurationError("Gaussian prior needs sd > 0")

    def logpdf(self, theta) -> float:
        return float(stats.norm.logpdf(theta, self.mean, self.sd))

    def support(self):
        return -np.inf, np.inf


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError("uniform prior needs lo < hi")

    def logpdf(self, theta) -> float:
        theta = float(theta)
        if self.lo < theta < self.hi:
            return -np.log(self.hi - self.lo)
        return -np.inf

    def support(self):
        return self.lo, self.hi


@dataclass(frozen=True)
class HalfCauchy:
    scale: float = 1.0

    def logpdf(self, x) -> float:
        return float(stats.halfcauchy.logpdf(x, scale=self.scale))

    def cdf(self, x):
        return stats.halfcauchy.cdf(x, scale=self.scale)

    def support(self):
        return 0.0, np.inf


@dataclass(frozen=True)
class PointMass:
    value: float

    def logpdf(self, x) -> float:
        return 0.0 if x == self.value else -np.inf

    def support(self):
        return self.value, self.value


@dataclass(frozen=True)
class ScalarParameter:
    prior: object

    def logpdf(self, theta) -> float:
        return self.prior.logpdf(theta)


@dataclass(frozen=True, eq=False)
class FieldParameter:
    """``theta(x) = T(xi(x))`` with ``xi ~ N(0, C)`` on ``grid`` and ``T`` exp or identity."""

    grid: np.ndarray
    prior_cov: KernelSpec
    transform: str = "exp"
    jitter: float = 1e-10

    def __post_init__(self):
        if self.transform not in ("exp", "identity"):
            raise ConfigurationError(f"unknown field transform {self.transform!r}")
        object.__setattr__(self, "grid", as_points(self.grid, self.prior_cov.dim))

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def covariance(self) -> np.ndarray:
        return kernel_matrix(self.prior_cov, self.grid, self.grid)

    def cholesky(self) -> np.ndarray:
        C = self.covariance()
        return np.linalg.cholesky(C + self.jitter * np.trace(C) / C.shape[0] * np.eye(C.shape[0]))

    def to_parameter(self, xi):
        return np.exp(xi) if self.transform == "exp" else np.asarray(xi)


def gaussian_reference(model) -> tuple:
    """Mean, covariance square root and transform of the Gaussian behind ``model``.

    pCN needs a Gaussian reference measure; uniform and half-Cauchy priors
    have none and raise :class:`UnsupportedPriorError`.
    """
    if isinstance(model, FieldParameter):
        return np.zeros(model.size), model.cholesky(), model.to_parameter
    prior = model.prior if isinstance(model, ScalarParameter) else model
    if isinstance(prior, LogGaussian):
        return np.array([prior.mean]), np.array([[prior.sd]]), lambda xi: float(np.exp(xi[0]))
    if isinstance(prior, Gaussian):
        return np.array([prior.mean]), np.array([[prior.sd]]), lambda xi: float(xi[0])
    raise UnsupportedPriorError(f"pCN needs a Gaussian reference; {type(prior).__name__} has none")


def make_prior(kind: str, a: Optional[float] = None, b: Optional[float] = None):
    """Prior from config keywords (``log_gaussian``, ``gaussian``, ``uniform``, ``half_cauchy``)."""
    kind = kind.lower()
    if kind == "log_gaussian":
        return LogGaussian(0.0 if a is None else a, 1.0 if b is None else b)
    if kind == "gaussian":
        return Gaussian(0.0 if a is None else a, 1.0 if b is None else b)
    if kind == "uniform":
        if a is None or b is None:
            raise ConfigurationError("uniform prior needs both bounds")
        return Uniform(a, b)
    if kind == "half_cauchy":
        return HalfCauchy(1.0 if a is None else a)
    if kind == "point_mass":
        if a is None:
            raise ConfigurationError("point-mass prior needs a value")
        return PointMass(a)
    raise ConfigurationError(f"unknown prior {kind!r}")
