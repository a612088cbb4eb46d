"""Symmetric collocation as Gaussian conditioning.

A prior ``u ~ GP(0, k)`` is conditioned on linear functionals of ``u``: each
observation block is a pair (operator, points) with data.  Stacking the blocks
gives the Gram matrix ``G = L Lbar K(X0)`` and the conditional measure

    mu(X)    = Lbar K(X, X0) G^-1 v
    Sigma(X) = K(X) - Lbar K(X, X0) G^-1 L K(X0, X).

``G`` is factorised once by Cholesky (with escalating jitter) and every
evaluation afterwards is a pair of triangular solves.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import DomainError, IllConditionedDesignError, NumericalError
from .geometry import Box, Disc, as_points
from .kernels import BOUNDARY_TRACE, IDENTITY, KernelSpec, Operator, kernel_matrix

logger = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_MAX = 1e-6
VARIANCE_CLAMP = 1e-10


# --------------------------------------------------------------------------
# designs
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Design:
    """Interior collocation points and boundary points on a domain."""

    interior_points: np.ndarray
    boundary_points: np.ndarray
    domain: Box | Disc = field(default_factory=Box)
    validate: bool = True

    def __post_init__(self):
        d = self.domain.dim
        xi = as_points(self.interior_points, d) if np.size(self.interior_points) else np.zeros((0, d))
        xb = as_points(self.boundary_points, d) if np.size(self.boundary_points) else np.zeros((0, d))
        object.__setattr__(self, "interior_points", np.array(xi, dtype=float))
        object.__setattr__(self, "boundary_points", np.array(xb, dtype=float))
        if self.validate:
            self.check()

    def check(self):
        if len(self.interior_points) and not np.all(self.domain.contains(self.interior_points, strict=True)):
            raise DomainError("interior design points must lie strictly inside the domain")
        if len(self.boundary_points) and not np.all(self.domain.on_boundary(self.boundary_points, tol=1e-12)):
            raise DomainError("boundary design points must lie on the domain boundary")
        pts = self.points
        if len(pts) > 1 and pdist(pts).min() <= 1e-12:
            raise DomainError("design contains duplicate points")

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.interior_points, self.boundary_points])

    @property
    def m_interior(self) -> int:
        return len(self.interior_points)

    @property
    def m_boundary(self) -> int:
        return len(self.boundary_points)

    def with_interior(self, interior: np.ndarray, validate: bool = True) -> "Design":
        return Design(interior, self.boundary_points, self.domain, validate)

    def fill_distance(self, candidate_grid: Optional[np.ndarray] = None) -> float:
        return fill_distance(self, candidate_grid)

    # CSV: x1[,x2],role
    def to_csv(self, path) -> None:
        d = self.domain.dim
        header = ",".join([f"x{j + 1}" for j in range(d)] + ["role"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for role, pts in (("interior", self.interior_points), ("boundary", self.boundary_points)):
                for p in pts:
                    fh.write(",".join(repr(float(v)) for v in p) + f",{role}\n")

    @classmethod
    def from_csv(cls, path, domain) -> "Design":
        interior, boundary = [], []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header[-1] != "role":
                raise DomainError(f"{path}: design CSV must end with a 'role' column")
            for line in fh:
                if not line.strip():
                    continue
                *coords, role = line.strip().split(",")
                target = {"interior": interior, "boundary": boundary}.get(role)
                if target is None:
                    raise DomainError(f"{path}: unknown role {role!r}")
                target.append([float(c) for c in coords])
        d = domain.dim
        return cls(np.array(interior).reshape(-1, d), np.array(boundary).reshape(-1, d), domain)


def uniform_design_1d(m: int, boundary: bool = True) -> Design:
    """``m`` evenly spaced interior points ``j/(m+1)`` on (0, 1), optionally with {0, 1}."""
    xi = np.arange(1, m + 1) / (m + 1.0)
    xb = np.array([0.0, 1.0]) if boundary else np.zeros(0)
    return Design(xi[:, None], xb[:, None], Box.unit(1))


def default_fill_grid(domain) -> np.ndarray:
    if domain.dim == 1:
        return domain.grid(10_000)
    return domain.grid(100)


def fill_distance(design: Design, candidate_grid: Optional[np.ndarray] = None) -> float:
    """``max_{x in grid} min_j |x - x_j|``, a grid approximation of the fill distance."""
    pts = design.points
    if len(pts) == 0:
        raise DomainError("fill distance of an empty design")
    grid = default_fill_grid(design.domain) if candidate_grid is None else as_points(candidate_grid, design.domain.dim)
    dist, _ = cKDTree(pts).query(grid)
    return float(np.max(dist))


# --------------------------------------------------------------------------
# operator sets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SemiLinearSplit:
    """``A = A1 + A2`` with ``A1`` linear and ``A2`` pointwise monotone.

    ``forward(u, theta)`` applies A2 and ``inverse(v, theta)`` undoes it.
    """

    linear: Operator
    forward: Callable
    inverse: Callable


@dataclass(frozen=True)
class OperatorSet:
    interior: Operator
    boundary: Operator = BOUNDARY_TRACE
    split: Optional[SemiLinearSplit] = None


# --------------------------------------------------------------------------
# factorisation
# --------------------------------------------------------------------------


def _min_eig_estimate(G: np.ndarray) -> float:
    try:
        return float(linalg.eigvalsh(G, subset_by_index=[0, 0])[0])
    except (linalg.LinAlgError, ValueError):
        return float("nan")


def nugget_scale(G: np.ndarray) -> np.ndarray:
    """Per-row scale of the jitter: the row's own diagonal entry (mean diagonal where that is zero)."""
    d = np.diag(G).copy()
    mean = max(float(np.mean(d)) if d.size else 0.0, np.finfo(float).tiny)
    d[~(d > 0)] = mean
    return d


def jittered_cholesky(G: np.ndarray, jitter: float = 0.0):
    """Lower Cholesky factor of ``G + j diag(G)`` with ``j`` escalated by x10 on failure.

    ``j`` starts at ``max(jitter, 1e-12)`` and may grow to ``1e-6``.  Scaling
    the nugget by each row's own prior variance means a point shared by two
    designs carries the same nugget in both, so nested designs stay nested.
    Returns ``(L, j)``; raises :class:`IllConditionedDesignError` on failure.
    """
    n = G.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    scale = nugget_scale(G)
    j = max(jitter, JITTER_START)
    while j <= JITTER_MAX * (1 + 1e-9):
        try:
            L = linalg.cholesky(G + np.diag(j * scale), lower=True, check_finite=True)
            return L, j
        except linalg.LinAlgError:
            logger.debug("cholesky failed at relative jitter %.1e, escalating", j)
            j *= 10.0
    raise IllConditionedDesignError("Gram matrix not positive definite after jitter escalation",
                                    _min_eig_estimate(G))


# --------------------------------------------------------------------------
# conditional measure
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CollocationPosterior:
    """Gaussian conditional measure of the solution given collocation data.

    ``blocks`` is a tuple of ``(operator, points)``; ``data`` stacks the
    observed values of each block in order.
    """

    kernel: KernelSpec
    blocks: tuple
    data: np.ndarray
    theta: Optional[float]
    gram: np.ndarray
    gram_factor: np.ndarray
    jitter: float
    weights: np.ndarray
    design: Optional[Design] = None
    operators: Optional[OperatorSet] = None

    @property
    def n_obs(self) -> int:
        return self.gram.shape[0]

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.gram_factor, True), rhs, check_finite=False)

    def _half_solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.solve_triangular(self.gram_factor, rhs, lower=True, check_finite=False)

    def cross(self, X, op: Operator = IDENTITY) -> np.ndarray:
        """``op Lbar K(X, X0)``: rows indexed by X, columns by stacked design blocks."""
        X = as_points(X, self.kernel.dim)
        if not self.blocks:
            return np.zeros((X.shape[0], 0))
        return np.hstack([kernel_matrix(self.kernel, X, P, op, L, self.theta) for L, P in self.blocks])

    def mean(self, X, op: Operator = IDENTITY) -> np.ndarray:
        return self.cross(X, op) @ self.weights

    def gain(self, X, op: Operator = IDENTITY) -> np.ndarray:
        """Matrix ``W`` with ``mean(X) = W @ data``; reusable across data vectors."""
        C = self.cross(X, op)
        return self._solve(C.T).T

    def cov(self, X, op: Operator = IDENTITY, clamp: bool = True) -> np.ndarray:
        X = as_points(X, self.kernel.dim)
        prior = kernel_matrix(self.kernel, X, X, op, op, self.theta)
        V = self._half_solve(self.cross(X, op).T)
        S = prior - V.T @ V
        S = 0.5 * (S + S.T)
        if clamp:
            diag = np.diag(S).copy()
            _check_variances(diag, np.max(np.abs(np.diag(prior)), initial=0.0))
            np.fill_diagonal(S, np.maximum(diag, 0.0))
        return S

    def variance(self, X, op: Operator = IDENTITY) -> np.ndarray:
        X = as_points(X, self.kernel.dim)
        prior = np.array([kernel_matrix(self.kernel, x[None], x[None], op, op, self.theta)[0, 0] for x in X]) \
            if op is not IDENTITY else _prior_diag(self.kernel, X, self.theta)
        V = self._half_solve(self.cross(X, op).T)
        var = prior - np.sum(V * V, axis=0)
        _check_variances(var, np.max(np.abs(prior), initial=0.0))
        return np.maximum(var, 0.0)

    def with_data(self, data: np.ndarray) -> "CollocationPosterior":
        """Same factorisation, new right-hand side."""
        data = np.asarray(data, dtype=float).ravel()
        if data.shape[0] != self.n_obs:
            raise ValueError("data length does not match the design")
        return CollocationPosterior(self.kernel, self.blocks, data, self.theta, self.gram, self.gram_factor,
                                    self.jitter, self._solve(data), self.design, self.operators)

    def factor_residual(self) -> float:
        """``max|L L^T - (G + jitter diag(G))|`` relative to ``max|G|``."""
        G = self.gram + np.diag(self.jitter * nugget_scale(self.gram))
        return float(np.max(np.abs(self.gram_factor @ self.gram_factor.T - G)) / max(np.max(np.abs(self.gram)), 1e-300))


def _prior_diag(kernel, X, theta):
    from .kernels import kernel_diagonal
    return kernel_diagonal(kernel, X, theta)


def _check_variances(var: np.ndarray, scale: float):
    tol = VARIANCE_CLAMP * max(1.0, scale)
    worst = float(np.min(var, initial=0.0))
    if worst < -tol:
        raise NumericalError(f"negative predictive variance {worst:.3e} below clamp tolerance {tol:.1e}")


def condition(kernel: KernelSpec, blocks: Sequence[tuple[Operator, np.ndarray]], data, theta=None,
              jitter: float = 0.0, design: Optional[Design] = None,
              operators: Optional[OperatorSet] = None) -> CollocationPosterior:
    """Condition ``GP(0, kernel)`` on ``L_b u(P_b) = data_b`` for every block ``(L_b, P_b)``."""
    blocks = tuple((op, as_points(P, kernel.dim)) for op, P in blocks if np.size(P))
    n = sum(P.shape[0] for _, P in blocks)
    data = np.asarray(data, dtype=float).ravel()
    if data.shape[0] != n:
        raise ValueError(f"expected {n} data values, got {data.shape[0]}")
    rows = []
    for Li, Pi in blocks:
        rows.append(np.hstack([kernel_matrix(kernel, Pi, Pj, Li, Lj, theta) for Lj, Pj in blocks]))
    G = np.vstack(rows) if rows else np.zeros((0, 0))
    G = 0.5 * (G + G.T)
    L, j = jittered_cholesky(G, jitter)
    if j > 0:
        logger.debug("collocation gram factorised with jitter %.3e (n=%d)", j, n)
    w = linalg.cho_solve((L, True), data, check_finite=False) if n else np.zeros(0)
    return CollocationPosterior(kernel, blocks, data, theta, G, L, j, w, design, operators)


def assemble(kernel: KernelSpec, operators: OperatorSet, design: Design, g, b, theta=None,
             jitter: float = 0.0) -> CollocationPosterior:
    """Conditional measure given ``A u = g`` at interior points and ``B u = b`` on the boundary."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if g.shape[0] != design.m_interior or (design.m_boundary and b.shape[0] != design.m_boundary):
        raise ValueError("data lengths do not match the design")
    blocks = [(operators.interior, design.interior_points)]
    data = [g]
    if design.m_boundary:
        blocks.append((operators.boundary, design.boundary_points))
        data.append(b)
    return condition(kernel, blocks, np.concatenate(data), theta, jitter, design, operators)


def posterior_mean(p: CollocationPosterior, X) -> np.ndarray:
    return p.mean(X)


def posterior_cov(p: CollocationPosterior, X) -> np.ndarray:
    return p.cov(X)


def sample_solution(p: CollocationPosterior, X, seed: int, count: int = 1) -> np.ndarray:
    """``count`` draws of ``u(X)``, shape ``(count, len(X))``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    mu = p.mean(X)
    S = p.cov(X)
    evals, evecs = np.linalg.eigh(S)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None))
    rng = np.random.default_rng(seed)
    return mu + rng.standard_normal((count, mu.shape[0])) @ root.T


# --------------------------------------------------------------------------
# a-posteriori bound on representer-span functions
# --------------------------------------------------------------------------


@dataclass
class BoundReport:
    max_violation: float
    n_violations: int
    rkhs_norm: float
    error: np.ndarray
    bound: np.ndarray


def local_error_bound_check(p: CollocationPosterior, coefficients, rep_points, test_points=None,
                            tol: float = 1e-8) -> BoundReport:
    """Compare ``|mu(x) - u0(x)|`` with ``sigma(x) ||u0||`` for ``u0 = sum_j c_j k(., r_j)``.

    ``p`` supplies kernel, blocks and theta; it is re-conditioned on the data
    that ``u0`` induces through those blocks.
    """
    kern = p.kernel
    R = as_points(rep_points, kern.dim)
    c = np.atleast_1d(np.asarray(coefficients, dtype=float))
    if test_points is None:
        test_points = (p.design.domain if p.design is not None else kern.domain).grid(
            100 if kern.dim == 1 else 10)
    X = as_points(test_points, kern.dim)
    norm2 = float(c @ kernel_matrix(kern, R, R, theta=p.theta) @ c)
    norm = np.sqrt(max(norm2, 0.0))
    data = np.concatenate([kernel_matrix(kern, P, R, L, IDENTITY, p.theta) @ c for L, P in p.blocks]) \
        if p.blocks else np.zeros(0)
    q = p.with_data(data)
    u0 = kernel_matrix(kern, X, R, theta=p.theta) @ c
    err = np.abs(q.mean(X) - u0)
    bound = np.sqrt(q.variance(X)) * norm
    excess = err - bound
    return BoundReport(float(np.max(excess, initial=-np.inf)), int(np.sum(excess > tol)), norm, err, bound)
