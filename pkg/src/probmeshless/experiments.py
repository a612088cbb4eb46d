"""Drivers for the forward, inverse, design and Allen-Cahn studies.

Each driver returns plain arrays and dataclasses.  Writing CSV files is left
to :mod:`probmeshless.cli`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import qmc

from .collocation import Design, assemble, sample_solution, uniform_design_1d
from .design import coordinate_exchange, linear_design_problem, semi_linear_design_problem
from .errors import ConfigurationError
from .geometry import Box
from .inverse.calibration import calibrate_empirical_bayes
from .inverse.likelihood import (GridPosterior, ObservationSet, grid_posterior, marginal_log_likelihood,
                                 plug_in_log_likelihood)
from .inverse.mcmc import ChainTrace, pcn_sample
from .inverse.priors import HalfCauchy, PointMass, ScalarParameter, Uniform
from .inverse.semilinear import SemiLinearInverseProblem, SolutionBank, pseudo_marginal_mcmc
from .kernels import KernelFamily, KernelSpec
from .problems import ProblemDefinition, allen_cahn_2d, allen_cahn_boundary_points, crude_solutions

logger = logging.getLogger(__name__)

LIKELIHOODS = ("pmm", "plugin")


def kernel_scale(kernel: KernelSpec) -> float:
    """The hyperparameter tuned by calibration: length scale or support scale."""
    if kernel.family is KernelFamily.INTEGRAL:
        return kernel_scale(kernel.base)
    if kernel.family is KernelFamily.SQUARED_EXPONENTIAL:
        return kernel.length_scale
    return kernel.support_scale


def with_kernel_scale(kernel: KernelSpec, value: float) -> KernelSpec:
    if kernel.family is KernelFamily.INTEGRAL:
        return replace(kernel, base=with_kernel_scale(kernel.base, value))
    if kernel.family is KernelFamily.SQUARED_EXPONENTIAL:
        return replace(kernel, length_scale=float(value))
    return replace(kernel, support_scale=float(value))


def satisfies_boundary(kernel: KernelSpec) -> bool:
    """Whether every draw from the prior already meets the homogeneous boundary condition."""
    return kernel.family is KernelFamily.NATURAL_POISSON_1D


def square_interior_points(m: int) -> np.ndarray:
    """``m`` points in the open unit square.

    A cell-centred ``a x b`` grid when ``m = a b`` with aspect ratio at most 2,
    otherwise the first ``m`` non-zero points of the Halton sequence.
    """
    a = max(k for k in range(1, int(np.sqrt(m)) + 1) if m % k == 0)
    b = m // a
    if b <= 2 * a:
        xs = (np.arange(b) + 0.5) / b
        ys = (np.arange(a) + 0.5) / a
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])
    return qmc.Halton(d=2, scramble=False).random(m + 1)[1:]


def default_design(problem: ProblemDefinition, kernel: KernelSpec, m: int, boundary_per_edge: int = 4) -> Design:
    if problem.domain.dim == 1:
        return uniform_design_1d(m, boundary=not satisfies_boundary(kernel))
    if problem.name == "allen_cahn_2d":
        return Design(square_interior_points(m), allen_cahn_boundary_points(boundary_per_edge), Box.unit(2))
    raise ConfigurationError(f"no default design for problem {problem.name!r}")


# --------------------------------------------------------------------------
# forward
# --------------------------------------------------------------------------


@dataclass
class ForwardResult:
    m: int
    x: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    exact: Optional[np.ndarray]

    @property
    def l2_error(self) -> float:
        """``||mu - u||_2`` on the evaluation grid (trapezoid rule)."""
        if self.exact is None:
            return float("nan")
        return float(np.sqrt(trapezoid((self.mean - self.exact) ** 2, self.x)))

    @property
    def variance_l1(self) -> float:
        return float(trapezoid(self.variance, self.x))


def forward_solve(problem: ProblemDefinition, kernel: KernelSpec, design: Design, theta=None,
                  grid: int = 100):
    """Condition on ``design`` and evaluate on ``grid`` equispaced points of [0, 1]."""
    if problem.is_semi_linear:
        raise ConfigurationError(f"forward solves need a linear problem, {problem.name} is semi-linear")
    if problem.domain.dim != 1:
        raise ConfigurationError("forward studies are implemented for 1D problems")
    problem.check_theta(theta)
    p = assemble(kernel, problem.operators, design, problem.interior_data(design, theta),
                 problem.boundary_data(design, theta), theta)
    x = np.linspace(0.0, 1.0, grid)
    X = x[:, None]
    exact = None if problem.exact_solution is None else problem.exact_solution(X, theta)
    return ForwardResult(design.m_interior, x, p.mean(X), p.variance(X), exact), p


def forward_study(problem: ProblemDefinition, kernel: KernelSpec, ms: Sequence[int], theta=None,
                  grid: int = 100) -> list[ForwardResult]:
    """Forward solves on uniform designs of increasing size."""
    return [forward_solve(problem, kernel, default_design(problem, kernel, m), theta, grid)[0] for m in ms]


def forward_samples(problem, kernel, design, theta, grid: int, count: int, seed: int) -> np.ndarray:
    res, p = forward_solve(problem, kernel, design, theta, grid)
    return res.x, sample_solution(p, res.x[:, None], seed, count)


# --------------------------------------------------------------------------
# linear inverse problems
# --------------------------------------------------------------------------


def synthetic_observations(problem: ProblemDefinition, locations, theta_true: float, noise_sd: float,
                           seed: int) -> ObservationSet:
    if problem.exact_solution is None:
        raise ConfigurationError(f"{problem.name} has no exact solution to synthesise data from")
    X = np.asarray(locations, dtype=float).reshape(-1, problem.domain.dim)
    rng = np.random.default_rng(seed)
    y = problem.exact_solution(X, theta_true) + noise_sd * rng.standard_normal(X.shape[0])
    return ObservationSet(X, y, noise_sd ** 2)


def linear_log_likelihood(problem: ProblemDefinition, kernel: KernelSpec, design: Design,
                          obs: ObservationSet, which: str):
    """``theta -> log pi(y | theta)`` with (``pmm``) or without (``plugin``) solver covariance."""
    if which not in LIKELIHOODS:
        raise ConfigurationError(f"unknown likelihood {which!r}")
    ll = marginal_log_likelihood if which == "pmm" else plug_in_log_likelihood

    def f(theta):
        p = assemble(kernel, problem.operators, design, problem.interior_data(design, theta),
                     problem.boundary_data(design, theta), theta)
        return ll(p, obs)

    return f


def theta_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Log-spaced when ``lo > 0`` (scale parameters), linear otherwise."""
    if not hi > lo:
        raise ConfigurationError("theta grid needs hi > lo")
    return np.exp(np.linspace(np.log(lo), np.log(hi), n)) if lo > 0 else np.linspace(lo, hi, n)


@dataclass
class InverseSummary:
    m: int
    likelihood: str
    mean: float
    sd: float
    posterior: Optional[GridPosterior] = None
    trace: Optional[ChainTrace] = None
    kernel_scale: float = float("nan")


def calibrate_kernel(problem, kernel, design, obs, theta_ref: float, grid=None) -> KernelSpec:
    """Empirical-Bayes choice of the kernel scale at a reference parameter value."""
    s0 = kernel_scale(kernel)
    grid = s0 * np.exp(np.linspace(-1.5, 1.5, 13)) if grid is None else grid

    def ll(s):
        return linear_log_likelihood(problem, with_kernel_scale(kernel, s), design, obs, "pmm")(theta_ref)

    res = calibrate_empirical_bayes(ll, grid)
    logger.info("calibrated kernel scale %.4g (log-likelihood %.4g)", res.value, res.log_likelihood)
    return with_kernel_scale(kernel, res.value)


class _ExactEstimator:
    """Deterministic likelihood exposed through the pseudo-marginal interface."""

    def __init__(self, problem, kernel, design, obs, which):
        self.args = (problem, kernel, design, obs, which)

    def log_estimate(self, theta, index, ell, rng):
        problem, kernel, design, obs, which = self.args
        if not theta > 0:
            return -np.inf
        return linear_log_likelihood(problem, with_kernel_scale(kernel, ell), design, obs, which)(theta)


def linear_inverse_study(problem: ProblemDefinition, kernel: KernelSpec, ms: Sequence[int], obs: ObservationSet,
                         prior, method: str = "grid", likelihoods: Sequence[str] = LIKELIHOODS,
                         grid: Optional[np.ndarray] = None, iters: int = 5000, burn: int = 1000,
                         lam: float = 0.3, proposal_sd: float = 0.1, seed: int = 0, theta0: float = 1.0,
                         lengthscale: str = "fixed", lengthscale_scale: float = 1.0,
                         lengthscale_proposal_sd: float = 0.2) -> list[InverseSummary]:
    """Posterior over a scalar parameter for each design size and likelihood."""
    if not problem.parametric or problem.is_semi_linear:
        raise ConfigurationError("linear inverse studies need a parametric linear problem")
    if lengthscale == "half_cauchy" and method != "pseudo_marginal":
        raise ConfigurationError("a half-Cauchy length-scale prior needs inference.method = pseudo_marginal")
    out = []
    for m in ms:
        design = default_design(problem, kernel, m)
        kern = kernel
        if lengthscale == "empirical_bayes":
            kern = calibrate_kernel(problem, kernel, design, obs, theta0)
        for k, which in enumerate(likelihoods):
            f = linear_log_likelihood(problem, kern, design, obs, which)
            if method == "grid":
                if grid is None:
                    raise ConfigurationError("grid inference needs a theta grid")
                post = grid_posterior(f, grid, prior.logpdf)
                out.append(InverseSummary(m, which, post.mean, post.sd, posterior=post,
                                          kernel_scale=kernel_scale(kern)))
                continue
            chain_seed = int(np.random.SeedSequence([seed, m, k]).generate_state(1)[0])
            if method == "pcn":
                trace = pcn_sample(ScalarParameter(prior), lambda t: -f(float(np.ravel(t)[0])), lam, iters, chain_seed,
                                   xi0=None)
                trace = replace(trace, samples=np.asarray(trace.samples, dtype=float).ravel())
            elif method == "pseudo_marginal":
                ell_prior = HalfCauchy(lengthscale_scale) if lengthscale == "half_cauchy" \
                    else PointMass(kernel_scale(kern))
                est = _ExactEstimator(problem, kern, design, obs, which)
                trace = pseudo_marginal_mcmc(est, prior, proposal_sd, 1, iters, chain_seed, theta0, ell_prior,
                                             kernel_scale(kern), lengthscale_proposal_sd)
            else:
                raise ConfigurationError(f"unknown inference method {method!r}")
            s = np.asarray(trace.samples[burn:], dtype=float)
            out.append(InverseSummary(m, which, float(s.mean()), float(s.std()), trace=trace,
                                      kernel_scale=kernel_scale(kern)))
    return out


# --------------------------------------------------------------------------
# design
# --------------------------------------------------------------------------


def design_study(problem: ProblemDefinition, kernel: KernelSpec, initial: Design, theta=None, sweeps: int = 3,
                 candidates: int = 21, loss: str = "a_optimal", seed: int = 0):
    """Coordinate exchange from ``initial``; linear or latent-variable loss as appropriate."""
    build = semi_linear_design_problem if problem.is_semi_linear else linear_design_problem
    dp = build(kernel, problem.operators, loss=loss)
    return coordinate_exchange(dp, initial, theta, sweeps, candidates, seed)


# --------------------------------------------------------------------------
# Allen-Cahn
# --------------------------------------------------------------------------


def observation_grid(k: int) -> np.ndarray:
    """``k x k`` points ``(i/(k+1), j/(k+1))`` in the unit square."""
    t = np.arange(1, k + 1) / (k + 1.0)
    X, Y = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def allen_cahn_observations(theta_true: float = 0.04, grid: int = 4, noise_sd: float = 0.1,
                            fine_grid_n: int = 60, seed: int = 0, solution: str = "unstable") -> ObservationSet:
    """Noisy values of a fine finite-difference solution on an ``grid x grid`` lattice."""
    sols = {s.label: s for s in crude_solutions(None, theta_true, fine_grid_n, seed)}
    X = observation_grid(grid)
    rng = np.random.default_rng(seed)
    return ObservationSet(X, sols[solution](X) + noise_sd * rng.standard_normal(X.shape[0]), noise_sd ** 2)


@dataclass
class AllenCahnChain:
    m: int
    likelihood: str
    trace: ChainTrace
    burn: int

    @property
    def samples(self) -> np.ndarray:
        return np.asarray(self.trace.samples[self.burn:], dtype=float)

    def histogram(self, bins: np.ndarray) -> np.ndarray:
        h, _ = np.histogram(self.samples, bins=bins, density=True)
        return h

    def mode(self, bins: np.ndarray) -> float:
        h = self.histogram(bins)
        k = int(np.argmax(h))
        return float(0.5 * (bins[k] + bins[k + 1]))

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def sd(self) -> float:
        return float(self.samples.std())


@dataclass
class AllenCahnSetup:
    problem: ProblemDefinition
    obs: ObservationSet
    bank: SolutionBank
    prior: object = field(default_factory=lambda: Uniform(0.02, 0.15))


def allen_cahn_setup(obs: ObservationSet, prior=None, bank_size: int = 27, grid_n: int = 20,
                     seed: int = 0) -> AllenCahnSetup:
    prior = Uniform(0.02, 0.15) if prior is None else prior
    lo, hi = (prior.lo, prior.hi) if isinstance(prior, Uniform) else (0.02, 0.15)
    bank = SolutionBank.build(lo, hi, bank_size, grid_n, seed)
    return AllenCahnSetup(allen_cahn_2d(), obs, bank, prior)


def allen_cahn_chain(setup: AllenCahnSetup, design: Design, likelihood: str, length_scale: float = 0.15,
                     iters: int = 10_000, burn: int = 2000, proposal_sd: float = 0.01, theta0: float = 0.06,
                     importance: str = "laplace_mixture", importance_scale: float = 10.0, n_importance: int = 500,
                     seed: int = 0, ell_prior=None, ell_proposal_sd: float = 0.2) -> AllenCahnChain:
    """Pseudo-marginal chain over ``(theta, solution index[, length scale])``."""
    if likelihood not in LIKELIHOODS:
        raise ConfigurationError(f"unknown likelihood {likelihood!r}")
    XA = design.interior_points
    bank = setup.bank
    inv = SemiLinearInverseProblem(
        setup.problem, lambda ell: KernelSpec.squared_exponential(ell, Box.unit(2)), design, setup.obs,
        lambda theta, i: bank.linear_part(theta, XA)[i], importance_scale, n_importance,
        include_solver_cov=(likelihood == "pmm"), importance=importance,
        solution_count=setup.problem.solution_count)
    ell_prior = PointMass(length_scale) if ell_prior is None else ell_prior
    trace = pseudo_marginal_mcmc(inv, setup.prior, proposal_sd, setup.problem.solution_count, iters, seed,
                                 theta0, ell_prior, length_scale, ell_proposal_sd)
    return AllenCahnChain(design.m_interior, likelihood, trace, min(burn, iters))
