"""Gaussian data likelihoods with and without the solver covariance, and grid posteriors."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.integrate import trapezoid

from ..collocation import CollocationPosterior
from ..errors import DomainError, NumericalError
from ..geometry import as_points

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Noisy point observations ``y = u(X) + e``, ``e ~ N(0, Gamma)``.

    ``noise_cov`` is either a scalar variance ``gamma^2`` or a full matrix.
    """

    locations: np.ndarray
    values: np.ndarray
    noise_cov: object

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.locations, dtype=float))
        if X.shape[0] == 1 and X.shape[1] > 2:
            X = X.T
        y = np.atleast_1d(np.asarray(self.values, dtype=float))
        if X.shape[0] != y.shape[0]:
            raise DomainError("number of locations and values differ")
        object.__setattr__(self, "locations", X)
        object.__setattr__(self, "values", y)
        G = self.gamma
        if not np.allclose(G, G.T) or np.linalg.eigvalsh(G).min() < -1e-12 * max(1.0, np.abs(G).max()):
            raise DomainError("noise covariance must be symmetric positive semi-definite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        G = np.asarray(self.noise_cov, dtype=float)
        if G.ndim == 0:
            return float(G) * np.eye(self.n)
        return G

    def permuted(self, perm) -> "ObservationSet":
        perm = np.asarray(perm)
        G = self.gamma[np.ix_(perm, perm)]
        return ObservationSet(self.locations[perm], self.values[perm], G)


def gaussian_logpdf(y, mean, cov) -> float:
    """``log N(y; mean, cov)`` through a Cholesky factor of ``cov``."""
    r = np.asarray(y, dtype=float) - np.asarray(mean, dtype=float)
    try:
        L = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        ev = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        raise NumericalError(
            f"covariance not positive definite (eigenvalues in [{ev.min():.3e}, {ev.max():.3e}])") from None
    a = linalg.solve_triangular(L, r, lower=True)
    return float(-0.5 * a @ a - np.sum(np.log(np.diag(L))) - 0.5 * r.shape[0] * _LOG_2PI)


def marginal_log_likelihood(p: CollocationPosterior, obs: ObservationSet) -> float:
    """``log N(y; mu(X), Sigma(X) + Gamma)``: the data likelihood with the solver marginalised."""
    X = as_points(obs.locations, p.kernel.dim)
    return gaussian_logpdf(obs.values, p.mean(X), p.cov(X) + obs.gamma)


def plug_in_log_likelihood(p: CollocationPosterior, obs: ObservationSet) -> float:
    """``log N(y; mu(X), Gamma)``: the conventional likelihood ignoring solver error."""
    X = as_points(obs.locations, p.kernel.dim)
    return gaussian_logpdf(obs.values, p.mean(X), obs.gamma)


def likelihood_gap(residual, solver_cov, noise_cov) -> float:
    """``plug_in - marginal`` from the eigen-decomposition of ``Gamma^-1/2 Sigma Gamma^-1/2``.

    Equals ``1/2 log det(I + Gamma^-1 Sigma) - 1/2 r' Gamma^-1 Sigma (Sigma + Gamma)^-1 r``.
    """
    evals, evecs = np.linalg.eigh(noise_cov)
    inv_half = evecs @ np.diag(evals ** -0.5) @ evecs.T
    M = inv_half @ solver_cov @ inv_half
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    lam = np.clip(lam, 0.0, None)
    s = V.T @ (inv_half @ np.asarray(residual, dtype=float))
    return float(0.5 * np.sum(np.log1p(lam)) - 0.5 * np.sum(lam / (1.0 + lam) * s * s))


# --------------------------------------------------------------------------
# posteriors over a parameter grid
# --------------------------------------------------------------------------


@dataclass
class GridPosterior:
    theta: np.ndarray
    log_likelihood: np.ndarray
    log_prior: np.ndarray
    density: np.ndarray

    @property
    def mean(self) -> float:
        return float(trapezoid(self.theta * self.density, self.theta))

    @property
    def sd(self) -> float:
        m = self.mean
        return float(np.sqrt(trapezoid((self.theta - m) ** 2 * self.density, self.theta)))

    @property
    def mode(self) -> float:
        return float(self.theta[np.argmax(self.density)])

    def interval(self, k: float = 1.0) -> tuple[float, float]:
        return self.mean - k * self.sd, self.mean + k * self.sd


def grid_posterior(log_likelihood: Callable[[float], float], theta_grid: Sequence[float],
                   log_prior: Callable[[float], float]) -> GridPosterior:
    """Posterior density on a grid, normalised by the trapezoid rule.

    Grid points whose likelihood evaluation fails numerically get zero mass.
    """
    theta = np.asarray(theta_grid, dtype=float)
    ll = np.empty_like(theta)
    lp = np.array([log_prior(t) for t in theta])
    for i, t in enumerate(theta):
        if not np.isfinite(lp[i]):
            ll[i] = -np.inf
            continue
        try:
            ll[i] = log_likelihood(t)
        except NumericalError as exc:
            logger.warning("likelihood failed at theta=%.4g: %s", t, exc)
            ll[i] = -np.inf
    lpost = ll + lp
    if not np.any(np.isfinite(lpost)):
        raise NumericalError("posterior is zero on the whole grid")
    w = np.exp(lpost - np.max(lpost))
    z = trapezoid(w, theta)
    return GridPosterior(theta, ll, lp, w / z)
