"""Built-in PDE problems and the finite-difference oracle for Allen-Cahn."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from .collocation import Design, OperatorSet, SemiLinearSplit
from .errors import ConfigurationError, DomainError, MultiplicityError, OracleError
from .geometry import Box, as_points
from .kernels import IDENTITY, LAPLACIAN, Coefficient, linear_combination, scaled_laplacian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemDefinition:
    """A linear or semi-linear elliptic problem ``A u = g`` in D, ``B u = b`` on the boundary.

    ``forcing``, ``boundary`` and ``exact_solution`` take ``(X, theta)`` with
    ``X`` of shape (n, d).
    """

    name: str
    domain: Box
    operators: OperatorSet
    forcing: Callable
    boundary: Callable
    exact_solution: Optional[Callable] = None
    solution_count: int = 1
    parametric: bool = False

    @property
    def is_semi_linear(self) -> bool:
        return self.operators.split is not None

    def check_theta(self, theta):
        if self.parametric:
            if theta is None or not theta > 0:
                raise DomainError(f"{self.name}: theta must be positive, got {theta}")
        return theta

    def interior_data(self, design: Design, theta=None) -> np.ndarray:
        return self.forcing(design.interior_points, theta)

    def boundary_data(self, design: Design, theta=None) -> np.ndarray:
        return self.boundary(design.boundary_points, theta)


def _sine_forcing(X, theta=None):
    X = as_points(X, 1)
    return -np.sin(2 * np.pi * X[:, 0])


def _zero(X, theta=None):
    return np.zeros(as_points(X).shape[0])


def poisson_1d() -> ProblemDefinition:
    """``u'' = -sin(2 pi x)`` on (0, 1), ``u(0) = u(1) = 0``."""

    def exact(X, theta=None):
        X = as_points(X, 1)
        return np.sin(2 * np.pi * X[:, 0]) / (2 * np.pi) ** 2

    return ProblemDefinition("poisson_1d", Box.unit(1), OperatorSet(LAPLACIAN), _sine_forcing, _zero, exact)


def parametric_poisson_1d() -> ProblemDefinition:
    """``theta u'' = -sin(2 pi x)`` on (0, 1) with zero Dirichlet data."""

    def exact(X, theta):
        if theta is None or not theta > 0:
            raise DomainError("theta must be positive")
        X = as_points(X, 1)
        return np.sin(2 * np.pi * X[:, 0]) / (theta * (2 * np.pi) ** 2)

    return ProblemDefinition("parametric_poisson_1d", Box.unit(1), OperatorSet(scaled_laplacian(1.0, 1)),
                             _sine_forcing, _zero, exact, parametric=True)


# --------------------------------------------------------------------------
# Allen-Cahn
# --------------------------------------------------------------------------


def allen_cahn_forward(u, theta):
    """The monotone part ``u^3 / theta``."""
    return np.asarray(u, dtype=float) ** 3 / theta


def allen_cahn_inverse(v, theta):
    """Real cube root of ``theta v``."""
    return np.cbrt(theta * np.asarray(v, dtype=float))


ALLEN_CAHN_LINEAR = linear_combination((Coefficient(-1.0, 1), LAPLACIAN), (Coefficient(-1.0, -1), IDENTITY))


def allen_cahn_boundary_value(X, theta=None, tol: float = 1e-12) -> np.ndarray:
    """+1 on the vertical edges, -1 on the horizontal ones; corners are rejected."""
    X = as_points(X, 2)
    vert = (np.abs(X[:, 0]) <= tol) | (np.abs(X[:, 0] - 1) <= tol)
    horiz = (np.abs(X[:, 1]) <= tol) | (np.abs(X[:, 1] - 1) <= tol)
    if np.any(vert & horiz):
        raise DomainError("Allen-Cahn boundary values are undefined at the corners")
    if np.any(~(vert | horiz)):
        raise DomainError("point is not on the boundary of the unit square")
    return np.where(vert, 1.0, -1.0)


def allen_cahn_boundary_points(per_edge: int) -> np.ndarray:
    """``per_edge`` equispaced points on each open edge of the unit square."""
    t = np.arange(1, per_edge + 1) / (per_edge + 1.0)
    zeros, ones = np.zeros_like(t), np.ones_like(t)
    return np.vstack([np.column_stack([zeros, t]), np.column_stack([ones, t]),
                      np.column_stack([t, zeros]), np.column_stack([t, ones])])


def allen_cahn_2d() -> ProblemDefinition:
    """``-theta Lap u + (u^3 - u)/theta = 0`` on the unit square, S = 3 solutions."""
    split = SemiLinearSplit(ALLEN_CAHN_LINEAR, allen_cahn_forward, allen_cahn_inverse)
    ops = OperatorSet(ALLEN_CAHN_LINEAR, split=split)
    return ProblemDefinition("allen_cahn_2d", Box.unit(2), ops, lambda X, theta=None: _zero(X),
                             allen_cahn_boundary_value, None, solution_count=3, parametric=True)


PROBLEMS = {
    "poisson_1d": poisson_1d,
    "parametric_poisson_1d": parametric_poisson_1d,
    "allen_cahn_2d": allen_cahn_2d,
}


def get_problem(name: str) -> ProblemDefinition:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


# --------------------------------------------------------------------------
# finite-difference Newton oracle
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CrudeSolution:
    """A converged finite-difference field on the (n+2) x (n+2) node grid.

    ``values[i, j]`` is the field at ``(nodes[i], nodes[j])``; boundary rows and
    columns hold the Dirichlet data (corners set to 0).
    """

    label: str
    theta: float
    nodes: np.ndarray
    values: np.ndarray
    residual: float
    iterations: int

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def __call__(self, X) -> np.ndarray:
        X = as_points(X, 2)
        spline = RectBivariateSpline(self.nodes, self.nodes, self.values, kx=3, ky=3)
        return spline.ev(X[:, 0], X[:, 1])

    def linear_part(self, X) -> np.ndarray:
        """``A1 u = -theta Lap u - u/theta`` by finite differences, interpolated to ``X``."""
        X = as_points(X, 2)
        u = self.values
        h = self.nodes[1] - self.nodes[0]
        lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / h ** 2
        a1 = -self.theta * lap - u[1:-1, 1:-1] / self.theta
        inner = self.nodes[1:-1]
        spline = RectBivariateSpline(inner, inner, a1, kx=3, ky=3)
        xs = np.clip(X[:, 0], inner[0], inner[-1])
        ys = np.clip(X[:, 1], inner[0], inner[-1])
        return spline.ev(xs, ys)

    def mean(self) -> float:
        return float(np.mean(self.interior))


def _fd_setup(grid_n: int):
    nodes = np.linspace(0.0, 1.0, grid_n + 2)
    h = nodes[1] - nodes[0]
    main = -2.0 * np.ones(grid_n)
    off = np.ones(grid_n - 1)
    D2 = sp.diags([off, main, off], [-1, 0, 1]) / h ** 2
    eye = sp.identity(grid_n)
    lap = (sp.kron(D2, eye) + sp.kron(eye, D2)).tocsr()
    # boundary contribution of the Dirichlet data to the 5-point Laplacian
    full = np.zeros((grid_n + 2, grid_n + 2))
    full[0, 1:-1] = 1.0
    full[-1, 1:-1] = 1.0
    full[1:-1, 0] = -1.0
    full[1:-1, -1] = -1.0
    bc = np.zeros((grid_n, grid_n))
    bc[0, :] += full[0, 1:-1]
    bc[-1, :] += full[-1, 1:-1]
    bc[:, 0] += full[1:-1, 0]
    bc[:, -1] += full[1:-1, -1]
    return nodes, lap, bc.ravel() / h ** 2, full


def _initial_guesses(nodes: np.ndarray, grid_n: int, theta: float) -> dict:
    inner = nodes[1:-1]
    x1, x2 = np.meshgrid(inner, inner, indexing="ij")
    w = max(theta, 0.02) * np.sqrt(2.0)
    to_vertical = np.minimum(x1, 1 - x1)
    to_horizontal = np.minimum(x2, 1 - x2)
    # each start carries the boundary layer its branch is known to have
    negative = 2 * np.exp(-to_vertical / w) - 1
    positive = 1 - 2 * np.exp(-to_horizontal / w)
    saddle = np.tanh((to_horizontal - to_vertical) / (2 * w))
    return {
        "negative stable": negative.ravel(),
        "unstable": saddle.ravel(),
        "positive stable": positive.ravel(),
    }


def _relax(u, theta, lap, bc, max_steps=5000, tol=1e-10):
    """Semi-implicit gradient flow towards a stable state (diffusion implicit, reaction explicit)."""
    dt = 0.1 * theta
    lu = spla.splu((sp.identity(u.shape[0]) - dt * theta * lap).tocsc())
    for _ in range(max_steps):
        nxt = lu.solve(u + dt * (theta * bc - (u ** 3 - u) / theta))
        if np.max(np.abs(nxt - u)) < tol:
            return nxt
        u = nxt
    return u


def _newton(u, theta, lap, bc, tol=1e-8, maxiter=100):
    def residual(v):
        return -theta * (lap @ v + bc) + (v ** 3 - v) / theta

    F = residual(u)
    for it in range(1, maxiter + 1):
        J = -theta * lap + sp.diags((3 * u * u - 1) / theta)
        step = spla.spsolve(J.tocsc(), -F)
        t, norm0 = 1.0, np.linalg.norm(F)
        while True:
            trial = u + t * step
            Ft = residual(trial)
            if np.linalg.norm(Ft) < (1 - 1e-4 * t) * norm0 or t < 1e-4:
                break
            t *= 0.5
        u, F = trial, Ft
        if np.max(np.abs(F)) < tol:
            return u, float(np.max(np.abs(F))), it
    raise OracleError(f"Newton did not converge in {maxiter} iterations (residual {np.max(np.abs(F)):.2e})")


def crude_solutions(problem: ProblemDefinition | None = None, theta: float = 0.04, grid_n: int = 20,
                    seed: int = 0, initial: dict | None = None, min_separation: float = 0.1):
    """The three Allen-Cahn branches by multi-start Newton on a finite-difference grid.

    Starts are deterministic profiles (near -1 with layers at the vertical
    edges, a saddle-shaped tanh, near +1 with layers at the horizontal edges); ``seed`` is accepted for interface uniformity and recorded only.
    ``initial`` maps labels to warm-start interior vectors (for continuation in
    theta).  Returns a list ordered negative-stable, unstable, positive-stable.
    """
    if problem is not None and problem.name != "allen_cahn_2d":
        raise ConfigurationError("crude solutions are implemented for allen_cahn_2d only")
    if not theta > 0:
        raise DomainError("theta must be positive")
    nodes, lap, bc, full = _fd_setup(grid_n)
    starts = initial if initial is not None else _initial_guesses(nodes, grid_n, theta)
    out = []
    for label, u0 in starts.items():
        u0 = np.array(u0, dtype=float)
        if label != "unstable" and initial is None:
            # Newton alone is unreliable from rough starts when the layer is under-resolved
            u0 = _relax(u0, theta, lap, bc)
        try:
            u, res, its = _newton(u0, theta, lap, bc)
        except OracleError as exc:
            raise OracleError(f"branch '{label}' at theta={theta}: {exc}") from None
        values = full.copy()
        values[1:-1, 1:-1] = u.reshape(grid_n, grid_n)
        out.append(CrudeSolution(label, theta, nodes, values, res, its))
        logger.debug("branch %s: theta=%.4f residual=%.2e after %d its", label, theta, res, its)
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            dist = np.sqrt(np.mean((out[i].interior - out[j].interior) ** 2))
            if dist <= min_separation:
                raise MultiplicityError(
                    f"branches '{out[i].label}' and '{out[j].label}' coincide at theta={theta} (L2 {dist:.3g})")
    return out


def discrete_residual(sol: CrudeSolution) -> float:
    """``max |-theta Lap_h u + (u^3 - u)/theta|`` over interior nodes."""
    u = sol.values
    h = sol.nodes[1] - sol.nodes[0]
    lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / h ** 2
    c = u[1:-1, 1:-1]
    return float(np.max(np.abs(-sol.theta * lap + (c ** 3 - c) / sol.theta)))
