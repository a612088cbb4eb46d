"""Collocation-point placement by A-optimal (or D-optimal) coordinate exchange.

The loss only depends on the posterior covariance, which never depends on the
data, so designs can be optimised before any forcing or observations exist.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .collocation import CollocationPosterior, Design, OperatorSet, condition
from .errors import DomainError, NumericalError
from .geometry import as_points
from .kernels import KernelSpec

logger = logging.getLogger(__name__)

A_OPTIMAL = "a_optimal"
D_OPTIMAL = "d_optimal"


def default_evaluation_points(domain) -> np.ndarray:
    """100 points in 1D, a 20 x 20 grid (clipped to the domain) in 2D."""
    return domain.grid(100) if domain.dim == 1 else domain.grid(20)


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """What a design is scored on.

    ``posterior(design, theta)`` returns a data-free conditional measure for
    ``design``; only its covariance is used.  Boundary points are held fixed
    and only interior points move.
    """

    posterior: Callable[[Design, Optional[float]], CollocationPosterior]
    evaluation_points: np.ndarray
    loss: str = A_OPTIMAL

    def __post_init__(self):
        if self.loss not in (A_OPTIMAL, D_OPTIMAL):
            raise ValueError(f"unknown design loss {self.loss!r}")
        if np.size(self.evaluation_points) == 0:
            raise ValueError("evaluation points must be non-empty")


def linear_design_problem(kernel: KernelSpec, operators: OperatorSet, evaluation_points=None,
                          loss: str = A_OPTIMAL) -> DesignProblem:
    """Design problem for ``A u = g`` in D, ``B u = b`` on the boundary."""

    def post(design: Design, theta=None):
        blocks = [(operators.interior, design.interior_points), (operators.boundary, design.boundary_points)]
        n = design.m_interior + design.m_boundary
        return condition(kernel, blocks, np.zeros(n), theta, design=design, operators=operators)

    pts = default_evaluation_points(kernel.domain) if evaluation_points is None else evaluation_points
    return DesignProblem(post, as_points(pts, kernel.dim), loss)


def semi_linear_design_problem(kernel: KernelSpec, operators: OperatorSet, evaluation_points=None,
                               loss: str = A_OPTIMAL) -> DesignProblem:
    """Design problem for the latent-variable system ``[A1; I; B]``."""
    from .inverse.semilinear import latent_blocks

    def post(design: Design, theta=None):
        blocks = latent_blocks(operators, design)
        n = 2 * design.m_interior + design.m_boundary
        return condition(kernel, blocks, np.zeros(n), theta, design=design, operators=operators)

    pts = default_evaluation_points(kernel.domain) if evaluation_points is None else evaluation_points
    return DesignProblem(post, as_points(pts, kernel.dim), loss)


def design_loss(problem: DesignProblem, design: Design, theta=None) -> float:
    """Mean posterior variance over the evaluation points (A) or log det of their covariance (D).

    Invalid or numerically singular designs score ``+inf``.
    """
    try:
        design.check()
        p = problem.posterior(design, theta)
        if problem.loss == A_OPTIMAL:
            return float(np.mean(p.variance(problem.evaluation_points)))
        S = p.cov(problem.evaluation_points)
        ev = np.linalg.eigvalsh(S)
        floor = np.finfo(float).eps * max(ev.max(), np.finfo(float).tiny)
        return float(np.sum(np.log(np.maximum(ev, floor))))
    except (DomainError, NumericalError) as exc:
        logger.debug("infeasible design: %s", exc)
        return float("inf")


@dataclass
class ExchangeResult:
    design: Design
    loss_trace: list = field(default_factory=list)
    evaluations: int = 0
    seconds: float = 0.0

    @property
    def initial_loss(self) -> float:
        return self.loss_trace[0]

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]


def _sorted_points(X: np.ndarray) -> np.ndarray:
    return X[np.lexsort(X.T[::-1])] if len(X) else X


def coordinate_exchange(problem: DesignProblem, initial: Design, theta=None, sweeps: int = 3,
                        candidates_per_coord: int = 21, seed: int = 0, refine: bool = True) -> ExchangeResult:
    """Greedy coordinate-wise search over the interior points.

    Each sweep visits every coordinate of every interior point (points in
    lexicographic order), scans ``candidates_per_coord`` values across the
    chord of the domain through the point, refines around the best candidate
    with a bounded scalar minimiser and keeps the move only if the loss drops
    strictly.  ``loss_trace[s]`` is the loss after ``s`` sweeps, hence
    non-increasing.  ``seed`` sets the offsets of the candidate grids.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    domain = initial.domain
    X = _sorted_points(initial.interior_points.copy())
    evals = 0

    def loss_of(P):
        nonlocal evals
        evals += 1
        return design_loss(problem, initial.with_interior(P, validate=False), theta)

    current = loss_of(X)
    trace = [current]
    for sweep in range(sweeps):
        for j in range(X.shape[0]):
            for axis in range(domain.dim):
                lo, hi = domain.coordinate_range(X[j], axis)
                if not hi > lo:
                    continue
                spacing = (hi - lo) / (candidates_per_coord + 1)
                offset = (rng.random() - 0.5) * spacing
                cands = lo + spacing * np.arange(1, candidates_per_coord + 1) + offset
                cands = cands[(cands > lo) & (cands < hi)]

                def trial(v):
                    P = X.copy()
                    P[j, axis] = v
                    return loss_of(P)

                values = np.array([trial(v) for v in cands])
                best_k = int(np.argmin(values))
                best_v, best_l = cands[best_k], values[best_k]
                if refine and np.isfinite(best_l):
                    a = max(lo, best_v - spacing)
                    b = min(hi, best_v + spacing)
                    res = minimize_scalar(trial, bounds=(a, b), method="bounded",
                                          options={"xatol": 1e-4 * (hi - lo), "maxiter": 25})
                    if res.fun < best_l and lo < res.x < hi:
                        best_v, best_l = float(res.x), float(res.fun)
                if best_l < current:
                    X[j, axis] = best_v
                    current = best_l
        trace.append(current)
        logger.info("sweep %d: loss %.6e", sweep + 1, current)
    out = initial.with_interior(X, validate=False)
    try:
        out.check()
    except DomainError:
        # only reachable if every move was infeasible and the initial design was invalid too
        out = initial
    return ExchangeResult(out, trace, evals, time.perf_counter() - t0)


def warm_start_redesign(problem: DesignProblem, previous: Design, theta_new=None, light_sweeps: int = 1,
                        candidates_per_coord: int = 11, seed: int = 0) -> ExchangeResult:
    """A short local search from a design that was optimal for a nearby parameter."""
    return coordinate_exchange(problem, previous, theta_new, light_sweeps, candidates_per_coord, seed)


def random_search(problem: DesignProblem, template: Design, n_designs: int, seed: int, theta=None):
    """Best of ``n_designs`` uniformly random interior designs (a baseline)."""
    rng = np.random.default_rng(seed)
    m = template.m_interior
    best, best_loss = None, np.inf
    for _ in range(n_designs):
        P = template.domain.sample(m, rng)
        loss = design_loss(problem, template.with_interior(P, validate=False), theta)
        if loss < best_loss:
            best, best_loss = P, loss
    return (None if best is None else template.with_interior(best)), best_loss


def min_pairwise_distance(X) -> float:
    from scipy.spatial.distance import pdist
    X = np.asarray(X)
    return float(pdist(X).min()) if len(X) > 1 else float("inf")
