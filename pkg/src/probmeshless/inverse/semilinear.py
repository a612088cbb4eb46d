"""Latent-variable treatment of semi-linear problems ``A1 u + A2(u) = g``.

Introducing ``z = A1 u`` at the interior design points turns the non-linear
collocation constraints into linear ones,

    A1 u = z,   u = A2^-1(g - z)   (interior),   B u = b   (boundary),

so ``u | z`` is Gaussian.  The data likelihood integrates ``z`` out against an
improper flat measure, which is estimated by importance sampling and used
inside pseudo-marginal MCMC.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ..collocation import CollocationPosterior, Design, OperatorSet, condition
from ..errors import ConfigurationError, NumericalError
from ..geometry import as_points
from ..kernels import IDENTITY, KernelSpec
from .likelihood import ObservationSet
from .mcmc import ChainTrace, pseudo_marginal_mh
from .priors import PointMass

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


class LatentRejection(NumericalError):
    """``A2^-1`` is undefined for the proposed latent state."""


def _split(operators: OperatorSet):
    if operators.split is None:
        raise ConfigurationError("operator set has no semi-linear split")
    return operators.split


def latent_blocks(operators: OperatorSet, design: Design):
    split = _split(operators)
    blocks = [(split.linear, design.interior_points), (IDENTITY, design.interior_points)]
    if design.m_boundary:
        blocks.append((operators.boundary, design.boundary_points))
    return blocks


def latent_data(operators: OperatorSet, g, b, z, theta) -> np.ndarray:
    """Stacked ``[z, A2^-1(g - z), b]``; raises :class:`LatentRejection` when undefined."""
    split = _split(operators)
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = split.inverse(np.asarray(g, dtype=float) - z, theta)
    if not np.all(np.isfinite(u)):
        raise LatentRejection("A2^-1(g - z) is undefined")
    return np.concatenate([z, u, np.atleast_1d(np.asarray(b, dtype=float))])


def semi_linear_posterior(kernel: KernelSpec, operators: OperatorSet, design: Design, g, b, z,
                          theta) -> CollocationPosterior:
    """Gaussian conditional of ``u`` given the latent ``z`` and boundary data."""
    data = latent_data(operators, g, b, z, theta)
    return condition(kernel, latent_blocks(operators, design), data, theta, design=design, operators=operators)


class LatentLikelihood:
    """``log N(y; mu_z(X), S)`` for many latent vectors at fixed ``(theta, kernel)``.

    ``mu_z(X) = W v(z)`` where ``W`` (the gain at the observation locations)
    and the factor of ``S = Sigma(X) + Gamma`` (or ``Gamma`` alone for the
    plug-in variant) do not depend on ``z``.
    """

    def __init__(self, kernel: KernelSpec, operators: OperatorSet, design: Design, g, b, theta,
                 obs: ObservationSet, include_solver_cov: bool = True):
        self.operators = operators
        self.theta = theta
        self.g = np.asarray(g, dtype=float)
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.y = obs.values
        n_latent = 2 * design.m_interior + design.m_boundary
        post = condition(kernel, latent_blocks(operators, design), np.zeros(n_latent), theta, design=design,
                         operators=operators)
        X = as_points(obs.locations, kernel.dim)
        self.gain = post.gain(X)
        S = obs.gamma + (post.cov(X) if include_solver_cov else 0.0)
        try:
            self._chol = linalg.cholesky(S, lower=True)
        except linalg.LinAlgError:
            raise NumericalError("observation covariance is not positive definite") from None
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        self.posterior = post

    def log_likelihood(self, Z) -> np.ndarray:
        """Vectorised over the rows of ``Z`` (shape (K, m_A)); undefined rows give ``-inf``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        split = _split(self.operators)
        with np.errstate(invalid="ignore", divide="ignore"):
            U = split.inverse(self.g[None, :] - Z, self.theta)
        V = np.hstack([Z, U, np.broadcast_to(self.b, (Z.shape[0], self.b.shape[0]))])
        R = self.y[None, :] - V @ self.gain.T
        A = linalg.solve_triangular(self._chol, R.T, lower=True, check_finite=False)
        out = -0.5 * np.sum(A * A, axis=0) - 0.5 * self._logdet - 0.5 * self.y.shape[0] * _LOG_2PI
        bad = ~np.all(np.isfinite(V), axis=1)
        out[bad] = -np.inf
        return out


@dataclass
class Estimate:
    """Log of an unbiased likelihood estimate with diagnostics."""

    log_value: float
    n_finite: int
    n_draws: int
    log_weights: Optional[np.ndarray] = None

    @property
    def failed(self) -> bool:
        return self.n_finite == 0

    @property
    def ess(self) -> float:
        """Effective sample size of the importance weights (needs ``keep_weights``)."""
        if self.log_weights is None or self.failed:
            return float("nan")
        lw = self.log_weights[np.isfinite(self.log_weights)]
        w = np.exp(lw - lw.max())
        return float(w.sum() ** 2 / (w * w).sum())


class GaussianImportance:
    """``N(mean, cov)``; ``cov`` may be a scalar variance (isotropic) or a matrix."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=float)
        k = self.mean.shape[0]
        if np.ndim(cov) == 0:
            if not cov > 0:
                raise ValueError("importance variance must be positive")
            self._chol = np.sqrt(float(cov)) * np.eye(k)
        else:
            try:
                self._chol = linalg.cholesky(np.asarray(cov, dtype=float), lower=True)
            except linalg.LinAlgError:
                raise NumericalError("importance covariance is not positive definite") from None
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))

    @classmethod
    def isotropic(cls, mean, sd: float) -> "GaussianImportance":
        return cls(mean, float(sd) ** 2)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, n: int, rng) -> np.ndarray:
        return self.mean + rng.standard_normal((n, self.dim)) @ self._chol.T

    def logpdf(self, Z) -> np.ndarray:
        A = linalg.solve_triangular(self._chol, (np.atleast_2d(Z) - self.mean).T, lower=True, check_finite=False)
        return -0.5 * np.sum(A * A, axis=0) - 0.5 * self._logdet - 0.5 * self.dim * _LOG_2PI


class MixtureImportance:
    """Finite mixture of importance densities with fixed weights."""

    def __init__(self, components: Sequence, weights=None):
        self.components = list(components)
        w = np.full(len(self.components), 1.0 / len(self.components)) if weights is None else np.asarray(weights)
        if w.shape[0] != len(self.components) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("mixture weights must be non-negative and sum to one")
        self.weights = w / w.sum()

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def sample(self, n: int, rng) -> np.ndarray:
        labels = rng.choice(len(self.components), size=n, p=self.weights)
        Z = np.empty((n, self.dim))
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == j)
            if idx.size:
                Z[idx] = comp.sample(idx.size, rng)
        return Z

    def logpdf(self, Z) -> np.ndarray:
        parts = np.array([np.log(w) + c.logpdf(Z) if w > 0 else np.full(np.atleast_2d(Z).shape[0], -np.inf)
                          for w, c in zip(self.weights, self.components)])
        return logsumexp(parts, axis=0)


def pseudo_marginal_estimate(latent: LatentLikelihood, importance, n_importance: int, rng: np.random.Generator,
                             keep_weights: bool = False) -> Estimate:
    """Average of ``n_importance`` single-draw estimates ``pi(y | z) / r(z)`` with ``z ~ r``.

    ``importance`` provides ``sample(n, rng)`` and ``logpdf(Z)``.  All draws
    failing gives ``log_value = -inf`` and ``failed``.
    """
    Z = importance.sample(n_importance, rng)
    logw = latent.log_likelihood(Z) - importance.logpdf(Z)
    finite = np.isfinite(logw)
    n_finite = int(finite.sum())
    if n_finite == 0:
        logger.warning("all %d importance draws were rejected", n_importance)
        return Estimate(-np.inf, 0, n_importance, logw if keep_weights else None)
    val = float(logsumexp(logw[finite]) - np.log(n_importance))
    return Estimate(val, n_finite, n_importance, logw if keep_weights else None)


# --------------------------------------------------------------------------
# crude-solution bank
# --------------------------------------------------------------------------


class SolutionBank:
    """Crude solutions on a theta grid, linearly interpolated in theta.

    ``fields[j]`` is the list of S solutions at ``thetas[j]``; the bank
    evaluates ``A1 u_i`` at a fixed point set and caches the table.
    """

    def __init__(self, thetas: Sequence[float], fields: Sequence[Sequence]):
        self.thetas = np.asarray(thetas, dtype=float)
        if np.any(np.diff(self.thetas) <= 0):
            raise ValueError("bank thetas must be increasing")
        self.fields = list(fields)
        self.solution_count = len(self.fields[0])
        self._tables = {}

    @classmethod
    def build(cls, lo: float, hi: float, n_theta: int = 27, grid_n: int = 20, seed: int = 0):
        from ..problems import crude_solutions
        thetas = np.linspace(lo, hi, n_theta)
        fields = [crude_solutions(None, t, grid_n, seed) for t in thetas]
        return cls(thetas, fields)

    def _table(self, X: np.ndarray, what: str) -> np.ndarray:
        key = (what, X.shape, X.tobytes())
        if key not in self._tables:
            if what == "linear":
                vals = [[sol.linear_part(X) for sol in sols] for sols in self.fields]
            else:
                vals = [[sol(X) for sol in sols] for sols in self.fields]
            self._tables[key] = np.asarray(vals)  # (n_theta, S, n_points)
        return self._tables[key]

    def _interp(self, table, theta):
        t = float(np.clip(theta, self.thetas[0], self.thetas[-1]))
        j = int(np.clip(np.searchsorted(self.thetas, t) - 1, 0, len(self.thetas) - 2))
        w = (t - self.thetas[j]) / (self.thetas[j + 1] - self.thetas[j])
        return (1 - w) * table[j] + w * table[j + 1]

    def linear_part(self, theta: float, X) -> np.ndarray:
        """``A1 u_i(X)`` for all solutions, shape (S, len(X))."""
        return self._interp(self._table(as_points(X, 2), "linear"), theta)

    def values(self, theta: float, X) -> np.ndarray:
        return self._interp(self._table(as_points(X, 2), "values"), theta)


# --------------------------------------------------------------------------
# semi-linear inverse problem and its pseudo-marginal sampler
# --------------------------------------------------------------------------


def laplace_importance(latent: LatentLikelihood, centre, scale: float, steps: int = 5):
    """Gaussian approximation to ``pi(y | z) N(z; centre, scale^2 I)`` in ``z``.

    A few Gauss-Newton steps on the log of that product, linearising
    ``A2^-1`` by a central difference of ``A2``.  Returns a
    :class:`GaussianImportance` at the mode with the inverse Gauss-Newton
    Hessian as covariance.  The ridge keeps the density proper in directions
    the data do not see.
    """
    split = _split(latent.operators)
    theta, g = latent.theta, latent.g
    z0 = np.asarray(centre, dtype=float)
    k = z0.shape[0]
    Wz, Wu = latent.gain[:, :k], latent.gain[:, k:2 * k]
    Sinv = lambda R: linalg.cho_solve((latent._chol, True), R, check_finite=False)  # noqa: E731
    ridge = np.eye(k) / scale ** 2

    def linearise(z):
        u = split.inverse(g - z, theta)
        h = 1e-6 * (1.0 + np.abs(u))
        fp = (split.forward(u + h, theta) - split.forward(u - h, theta)) / (2 * h)
        fp = np.maximum(fp, 1e-6 * max(1.0, float(np.max(fp))))
        M = Wz - Wu / fp[None, :]
        return u, M, M.T @ Sinv(M) + ridge

    z = z0.copy()
    for _ in range(steps):
        with np.errstate(invalid="ignore", divide="ignore"):
            u, M, H = linearise(z)
        if not np.all(np.isfinite(H)):
            break
        r = latent.y - latent.gain @ np.concatenate([z, u, latent.b])
        step = np.linalg.solve(H, M.T @ Sinv(r) - (z - z0) / scale ** 2)
        if not np.all(np.isfinite(step)):
            break
        z = z + step
    with np.errstate(invalid="ignore", divide="ignore"):
        _, _, H = linearise(z)
    try:
        cov = linalg.cho_solve((linalg.cholesky(H, lower=True), True), np.eye(k))
    except linalg.LinAlgError:
        raise NumericalError("importance Hessian is not positive definite") from None
    return GaussianImportance(z, 0.5 * (cov + cov.T))


IMPORTANCE_KINDS = ("isotropic", "laplace", "laplace_mixture")


class SemiLinearInverseProblem:
    """Everything needed to estimate ``pi(y | theta, ell)`` for a semi-linear problem.

    ``kernel_factory(ell)`` returns the kernel at length scale ``ell`` and
    ``importance_mean(theta, i)`` the latent centre ``A1 u_i`` for solution
    ``i``.  The importance density for index ``i`` is

    ``isotropic``
        ``N(centre_i, scale^2 I)``;
    ``laplace``
        the Gaussian fit of :func:`laplace_importance` started from ``centre_i``
        with ridge ``scale``;
    ``laplace_mixture``
        half of ``laplace`` for ``i`` plus half an equal mixture of the fits
        from every solution, so that one poor fit cannot dominate.

    The target does not depend on ``i``, only the estimator variance does.
    The latent likelihood and the fits are cached for the last ``(theta, ell)``
    so index moves only pay for the importance draws.
    """

    def __init__(self, problem, kernel_factory: Callable, design: Design, obs: ObservationSet,
                 importance_mean: Callable, importance_scale: float, n_importance: int = 500,
                 include_solver_cov: bool = True, importance: str = "isotropic", solution_count: int = 1):
        if importance not in IMPORTANCE_KINDS:
            raise ConfigurationError(f"unknown importance density {importance!r}")
        self.problem = problem
        self.kernel_factory = kernel_factory
        self.design = design
        self.obs = obs
        self.importance_mean = importance_mean
        self.importance_scale = importance_scale
        self.n_importance = n_importance
        self.include_solver_cov = include_solver_cov
        self.importance = importance
        self.solution_count = solution_count
        self._cache_key = None
        self._cache = {}

    def latent_likelihood(self, theta: float, ell: float) -> LatentLikelihood:
        key = (float(theta), float(ell))
        if key != self._cache_key:
            d = self.design
            g = self.problem.forcing(d.interior_points, theta)
            b = self.problem.boundary(d.boundary_points, theta) if d.m_boundary else np.zeros(0)
            lat = LatentLikelihood(self.kernel_factory(ell), self.problem.operators, d, g, b, theta, self.obs,
                                   self.include_solver_cov)
            self._cache_key, self._cache = key, {"latent": lat}
        return self._cache["latent"]

    def _fit(self, theta, ell, i):
        lat = self.latent_likelihood(theta, ell)
        if i not in self._cache:
            self._cache[i] = laplace_importance(lat, self.importance_mean(theta, i), self.importance_scale)
        return self._cache[i]

    def importance_density(self, theta: float, index: int, ell: float):
        if self.importance == "isotropic":
            return GaussianImportance.isotropic(self.importance_mean(theta, index), self.importance_scale)
        own = self._fit(theta, ell, index)
        if self.importance == "laplace":
            return own
        S = self.solution_count
        comps = [self._fit(theta, ell, s) for s in range(S)]
        weights = np.full(S, 0.5 / S)
        weights[index] += 0.5
        return MixtureImportance(comps, weights)

    def estimate(self, theta: float, index: int, ell: float, rng, keep_weights: bool = False) -> Estimate:
        try:
            lat = self.latent_likelihood(theta, ell)
            density = self.importance_density(theta, index, ell)
        except NumericalError as exc:
            logger.debug("likelihood unavailable at theta=%.4g ell=%.4g: %s", theta, ell, exc)
            return Estimate(-np.inf, 0, self.n_importance)
        return pseudo_marginal_estimate(lat, density, self.n_importance, rng, keep_weights)

    def log_estimate(self, theta: float, index: int, ell: float, rng) -> float:
        return self.estimate(theta, index, ell, rng).log_value


def pseudo_marginal_mcmc(problem, prior, proposal_sd: float, solution_count: int, iters: int, seed: int,
                         theta0: float, ell_prior=None, ell0: float = 1.0, ell_proposal_sd: float = 0.2,
                         index0: int = 0) -> ChainTrace:
    """Pseudo-marginal Metropolis-within-Gibbs on ``(theta, i, ell)``.

    Every iteration updates, in turn: ``theta`` by a Gaussian random walk;
    ``log ell`` by a Gaussian random walk under ``ell_prior`` (skipped, with
    no random draws, when the prior is ``None`` or a :class:`PointMass`); and
    the solution index ``i`` by a uniform proposal on ``{0, ..., S-1}``
    (skipped when ``S = 1``).  Each update uses a fresh likelihood estimate for
    the proposal and the stored one for the current state.  ``problem`` must
    provide ``log_estimate(theta, index, ell, rng)``.  ``accepted`` in the
    trace refers to the theta update.
    """
    sample_ell = ell_prior is not None and not isinstance(ell_prior, PointMass)
    if isinstance(ell_prior, PointMass):
        ell0 = ell_prior.value

    def log_prior(x):
        theta, _, ell = x
        lp = prior.logpdf(theta)
        if sample_ell and np.isfinite(lp):
            lp += ell_prior.logpdf(ell)
        return lp

    def move_theta(x, rng):
        return (x[0] + proposal_sd * rng.standard_normal(), x[1], x[2])

    def move_ell(x, rng):
        return (x[0], x[1], x[2] * np.exp(ell_proposal_sd * rng.standard_normal()))

    def ell_q_ratio(x, x_new):
        # random walk on log ell: q(ell | ell') / q(ell' | ell) = ell' / ell
        return float(np.log(x_new[2]) - np.log(x[2]))

    def move_index(x, rng):
        return (x[0], int(rng.integers(solution_count)), x[2])

    moves = [(move_theta, None)]
    if sample_ell:
        moves.append((move_ell, ell_q_ratio))
    if solution_count > 1:
        moves.append((move_index, None))

    def log_est(x, rng):
        return problem.log_estimate(x[0], x[1], x[2], rng)

    states, lls, acc = pseudo_marginal_mh(log_prior, log_est, moves, (float(theta0), int(index0), float(ell0)),
                                         iters, seed)
    theta = np.array([s[0] for s in states])
    idx = np.array([s[1] for s in states], dtype=int)
    ells = np.array([s[2] for s in states])
    rates = acc.mean(axis=0) if iters else np.full(len(moves), np.nan)
    logger.info("pseudo-marginal chain: %d iterations, acceptance per move %s", iters, np.round(rates, 3))
    meta = {"proposal_sd": proposal_sd, "solution_count": solution_count,
            "move_acceptance": [float(r) for r in rates]}
    return ChainTrace(theta, lls, acc[:, 0], seed, idx, ells if sample_ell else None, meta)
