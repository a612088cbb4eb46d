"""Kernel families, linear operators, and operator-applied kernel matrices.

Every operator used here is a theta-dependent linear combination of the
identity and the Laplacian, so any operator pair acting on a kernel reduces to
four base matrices: ``k``, ``Lap_x k``, ``Lap_y k`` and ``Lap_x Lap_y k``.
Kernel families provide those blocks in closed form (or, for the integral-type
construction, by Gauss-Legendre quadrature of closed forms).
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import green1d
from .errors import ConfigurationError, UnsupportedOperatorError
from .geometry import Box, as_points, pairwise_distances


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Coefficient:
    """``value * theta**theta_power`` with ``theta_power`` in {-1, 0, 1}."""

    value: float = 1.0
    theta_power: int = 0

    def __post_init__(self):
        if self.theta_power not in (-1, 0, 1):
            raise ConfigurationError("coefficients are restricted to c, c*theta and c/theta")

    def __call__(self, theta: float) -> float:
        if self.theta_power == 0:
            return float(self.value)
        if theta is None:
            raise ConfigurationError("theta is required for a theta-dependent coefficient")
        return float(self.value) * float(theta) ** self.theta_power


class OperatorKind(enum.Enum):
    IDENTITY = "identity"
    LAPLACIAN = "laplacian"
    SCALED_LAPLACIAN = "scaled_laplacian"
    LINEAR_COMBINATION = "linear_combination"
    BOUNDARY_TRACE = "boundary_trace"


@dataclass(frozen=True)
class Operator:
    kind: OperatorKind
    coefficient: Optional[Coefficient] = None
    terms: tuple = ()

    @property
    def order(self) -> int:
        if self.kind in (OperatorKind.LAPLACIAN, OperatorKind.SCALED_LAPLACIAN):
            return 2
        if self.kind is OperatorKind.LINEAR_COMBINATION:
            return max((op.order for _, op in self.terms), default=0)
        return 0

    def expand(self, theta=None) -> tuple[float, float]:
        """Coefficients ``(a, b)`` such that the operator is ``a I + b Lap`` at ``theta``."""
        kind = self.kind
        if kind in (OperatorKind.IDENTITY, OperatorKind.BOUNDARY_TRACE):
            return 1.0, 0.0
        if kind is OperatorKind.LAPLACIAN:
            return 0.0, 1.0
        if kind is OperatorKind.SCALED_LAPLACIAN:
            return 0.0, self.coefficient(theta)
        a = b = 0.0
        for coef, op in self.terms:
            c = coef(theta)
            ai, bi = op.expand(theta)
            a += c * ai
            b += c * bi
        return a, b

    def __repr__(self):
        if self.kind is OperatorKind.SCALED_LAPLACIAN:
            return f"ScaledLaplacian({self.coefficient})"
        if self.kind is OperatorKind.LINEAR_COMBINATION:
            return "LinearCombination(" + ", ".join(f"{c}*{op!r}" for c, op in self.terms) + ")"
        return self.kind.name.title().replace("_", "")


IDENTITY = Operator(OperatorKind.IDENTITY)
LAPLACIAN = Operator(OperatorKind.LAPLACIAN)
BOUNDARY_TRACE = Operator(OperatorKind.BOUNDARY_TRACE)


def scaled_laplacian(value: float = 1.0, theta_power: int = 1) -> Operator:
    return Operator(OperatorKind.SCALED_LAPLACIAN, Coefficient(value, theta_power))


def linear_combination(*terms: tuple[Coefficient, Operator]) -> Operator:
    return Operator(OperatorKind.LINEAR_COMBINATION, terms=tuple(terms))


# --------------------------------------------------------------------------
# kernel specs
# --------------------------------------------------------------------------


class KernelFamily(enum.Enum):
    WENDLAND_C0 = "wendland_c0"
    WENDLAND_C2 = "wendland_c2"
    SQUARED_EXPONENTIAL = "squared_exponential"
    NATURAL_POISSON_1D = "natural_poisson_1d"
    INTEGRAL = "integral"


# maximum number of Laplacians per argument with a closed form; (per side, both sides)
_LAPLACIAN_SUPPORT = {
    KernelFamily.WENDLAND_C0: (0, False),
    KernelFamily.WENDLAND_C2: (1, False),
    KernelFamily.SQUARED_EXPONENTIAL: (1, True),
    KernelFamily.NATURAL_POISSON_1D: (1, True),
}


@dataclass(frozen=True)
class KernelSpec:
    """An immutable description of a positive-definite kernel.

    ``support_scale`` is the Wendland ``eps`` (support radius ``1/eps``),
    ``length_scale`` the squared-exponential ``l``.  For the integral-type
    family, ``base`` is the kernel being convolved with itself over ``domain``
    and ``quadrature_order`` the Gauss-Legendre order (per kink-free panel in
    1D, per axis in 2D).
    """

    family: KernelFamily
    support_scale: Optional[float] = None
    length_scale: Optional[float] = None
    domain: Box = field(default_factory=Box)
    base: Optional["KernelSpec"] = None
    quadrature_order: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.family, KernelFamily):
            try:
                object.__setattr__(self, "family", KernelFamily(self.family))
            except ValueError:
                raise ConfigurationError(f"unknown kernel family {self.family!r}") from None
        fam = self.family
        if fam in (KernelFamily.WENDLAND_C0, KernelFamily.WENDLAND_C2, KernelFamily.NATURAL_POISSON_1D):
            if self.support_scale is None or not self.support_scale > 0:
                raise ConfigurationError(f"{fam.value} needs a positive support_scale")
        if fam is KernelFamily.SQUARED_EXPONENTIAL:
            if self.length_scale is None or not self.length_scale > 0:
                raise ConfigurationError("squared_exponential needs a positive length_scale")
        if fam is KernelFamily.NATURAL_POISSON_1D and self.domain != Box.unit(1):
            raise ConfigurationError("the natural Poisson kernel is defined on (0, 1) only")
        if fam is KernelFamily.INTEGRAL:
            if self.base is None or self.base.family in (KernelFamily.INTEGRAL, KernelFamily.NATURAL_POISSON_1D):
                raise ConfigurationError("integral-type kernel needs a stationary base kernel")
            if self.quadrature_order is None:
                object.__setattr__(self, "quadrature_order", 8 if self.dim == 1 else 20)
            if self.quadrature_order < 2:
                raise ConfigurationError("quadrature_order must be >= 2")
            if self.base.domain != self.domain:
                object.__setattr__(self, "base", _replace(self.base, domain=self.domain))
        if self.dim not in (1, 2):
            raise ConfigurationError("only d in {1, 2} is supported")

    @property
    def dim(self) -> int:
        return self.domain.dim

    # convenience constructors ------------------------------------------------

    @classmethod
    def wendland_c0(cls, eps: float, domain: Box | None = None) -> "KernelSpec":
        return cls(KernelFamily.WENDLAND_C0, support_scale=eps, domain=domain or Box.unit(1))

    @classmethod
    def wendland_c2(cls, eps: float, domain: Box | None = None) -> "KernelSpec":
        return cls(KernelFamily.WENDLAND_C2, support_scale=eps, domain=domain or Box.unit(1))

    @classmethod
    def squared_exponential(cls, length_scale: float, domain: Box | None = None) -> "KernelSpec":
        return cls(KernelFamily.SQUARED_EXPONENTIAL, length_scale=length_scale, domain=domain or Box.unit(1))

    @classmethod
    def natural_poisson_1d(cls, eps: float) -> "KernelSpec":
        return cls(KernelFamily.NATURAL_POISSON_1D, support_scale=eps, domain=Box.unit(1))

    @classmethod
    def integral(cls, base: "KernelSpec", quadrature_order: int | None = None,
                 domain: Box | None = None) -> "KernelSpec":
        return cls(KernelFamily.INTEGRAL, base=base, domain=domain or base.domain,
                   quadrature_order=quadrature_order)

    def with_length_scale(self, length_scale: float) -> "KernelSpec":
        if self.family is KernelFamily.INTEGRAL:
            return _replace(self, base=self.base.with_length_scale(length_scale))
        return _replace(self, length_scale=length_scale)

    def supports(self, n_left: int, n_right: int) -> bool:
        """Whether ``Lap^n_left`` x ``Lap^n_right`` has a closed form for this family."""
        if self.family is KernelFamily.INTEGRAL:
            per_side, _ = _LAPLACIAN_SUPPORT[self.base.family]
            return n_left <= per_side and n_right <= per_side
        per_side, both = _LAPLACIAN_SUPPORT[self.family]
        if n_left > per_side or n_right > per_side:
            return False
        return both or (n_left + n_right <= per_side)


def _replace(spec: KernelSpec, **changes) -> KernelSpec:
    from dataclasses import replace
    return replace(spec, **changes)


# --------------------------------------------------------------------------
# radial profiles: value, Laplacian, bi-Laplacian as functions of distance
# --------------------------------------------------------------------------


def _radial_block(spec: KernelSpec, rho: np.ndarray, n_lap: int) -> np.ndarray:
    d = spec.dim
    fam = spec.family
    if fam is KernelFamily.SQUARED_EXPONENTIAL:
        ell2 = spec.length_scale ** 2
        s = rho * rho / ell2
        phi = np.exp(-0.5 * s)
        if n_lap == 0:
            return phi
        if n_lap == 1:
            return (s - d) / ell2 * phi
        return (s * s - 2.0 * (d + 2) * s + d * (d + 2)) / (ell2 * ell2) * phi
    eps = spec.support_scale
    r = eps * rho
    t = np.maximum(1.0 - r, 0.0)
    if fam is KernelFamily.WENDLAND_C0:
        return t * t
    if fam is KernelFamily.WENDLAND_C2:
        t2 = t * t
        if n_lap == 0:
            return t2 * t2 * (4.0 * r + 1.0)
        # eps^2 (phi'' + (d-1) phi'/r), phi = (1-r)^4 (4r+1)
        return 20.0 * eps * eps * t2 * ((4.0 * r - 1.0) - (d - 1) * t)
    raise ConfigurationError(f"{fam.value} is not a radial family")


def _natural_block(spec: KernelSpec, X, Y, n_left, n_right, theta) -> np.ndarray:
    eps = spec.support_scale
    theta = 1.0 if theta is None else float(theta)
    x = X[:, 0][:, None]
    y = Y[:, 0][None, :]
    if n_left and n_right:
        out = green1d.wendland_c0(x, y, eps)
    elif n_left:
        out = green1d.lambda_against_green(x, y, eps)
    elif n_right:
        out = green1d.lambda_against_green(y, x, eps)
    else:
        out = green1d.natural_kernel_poisson_1d(x, y, eps)
    return out / theta ** 2


def _integral_nodes_1d(spec: KernelSpec, X: np.ndarray, Y: np.ndarray):
    """Composite Gauss-Legendre rule whose panel edges include every kink of every pair."""
    lo, hi = spec.domain.lower[0], spec.domain.upper[0]
    pts = np.concatenate([X[:, 0], Y[:, 0]])
    edges = [pts]
    base = spec.base
    if base.family in (KernelFamily.WENDLAND_C0, KernelFamily.WENDLAND_C2):
        delta = 1.0 / base.support_scale
        edges += [pts - delta, pts + delta]
    edges = np.concatenate(edges + [np.array([lo, hi])])
    edges = np.unique(np.clip(edges, lo, hi))
    gx, gw = np.polynomial.legendre.leggauss(spec.quadrature_order)
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    keep = half > 0
    left, half = left[keep], half[keep]
    nodes = (left + half)[:, None] + half[:, None] * gx
    weights = half[:, None] * gw
    return nodes.reshape(-1, 1), weights.ravel()


def _integral_nodes_2d(spec: KernelSpec):
    q = spec.quadrature_order
    gx, gw = np.polynomial.legendre.leggauss(q)
    axes, ws = [], []
    for lo, hi in zip(spec.domain.lower, spec.domain.upper):
        half = 0.5 * (hi - lo)
        axes.append(lo + half + half * gx)
        ws.append(half * gw)
    mx, my = np.meshgrid(axes[0], axes[1], indexing="ij")
    wx, wy = np.meshgrid(ws[0], ws[1], indexing="ij")
    return np.column_stack([mx.ravel(), my.ravel()]), (wx * wy).ravel()


def _integral_block(spec: KernelSpec, X, Y, n_left, n_right) -> np.ndarray:
    if spec.dim == 1:
        Z, w = _integral_nodes_1d(spec, X, Y)
    else:
        Z, w = _integral_nodes_2d(spec)
    # sqrt(w) on both sides makes each summand a product of the same two floats
    # whichever argument comes first, so k(x, y) == k(y, x) bitwise
    sw = np.sqrt(w)
    left = _radial_block(spec.base, pairwise_distances(X, Z), n_left) * sw
    right = _radial_block(spec.base, pairwise_distances(Z, Y), n_right) * sw[:, None]
    out = left @ right
    if n_left == n_right and X.shape == Y.shape and np.array_equal(X, Y):
        # BLAS blocking breaks exact symmetry of a Gram block; restore it
        out = 0.5 * (out + out.T)
    return out


def base_block(spec: KernelSpec, X, Y, n_left: int = 0, n_right: int = 0, theta=None) -> np.ndarray:
    """``Lap_x^n_left Lap_y^n_right k(X, Y)`` as an (len(X), len(Y)) matrix."""
    X = np.ascontiguousarray(as_points(X, spec.dim))
    Y = np.ascontiguousarray(as_points(Y, spec.dim))
    if not spec.supports(n_left, n_right):
        raise UnsupportedOperatorError(
            f"{spec.family.value} has no closed form for Laplacian orders ({n_left}, {n_right})")
    block = _cached_block(spec, X.shape, X.tobytes(), Y.shape, Y.tobytes(), n_left, n_right)
    if spec.family is KernelFamily.NATURAL_POISSON_1D and theta is not None:
        return block / float(theta) ** 2
    return block.copy()


@functools.lru_cache(maxsize=256)
def _cached_block(spec, x_shape, x_bytes, y_shape, y_bytes, n_left, n_right) -> np.ndarray:
    # blocks do not depend on theta (the natural kernel's theta^-2 is applied by the caller),
    # so repeated evaluation over a parameter grid reuses them
    X = np.frombuffer(x_bytes, dtype=float).reshape(x_shape)
    Y = np.frombuffer(y_bytes, dtype=float).reshape(y_shape)
    fam = spec.family
    if fam is KernelFamily.NATURAL_POISSON_1D:
        out = _natural_block(spec, X, Y, n_left, n_right, None)
    elif fam is KernelFamily.INTEGRAL:
        out = _integral_block(spec, X, Y, n_left, n_right)
    else:
        out = _radial_block(spec, pairwise_distances(X, Y), n_left + n_right)
    out.setflags(write=False)
    return out


def kernel_matrix(spec: KernelSpec, X, Y, left: Operator = IDENTITY, right: Operator = IDENTITY,
                  theta=None) -> np.ndarray:
    """Matrix of ``(left right' k)(x_i, y_j)``: ``left`` acts on x, ``right`` on y."""
    a_l, b_l = left.expand(theta)
    a_r, b_r = right.expand(theta)
    X = as_points(X, spec.dim)
    Y = as_points(Y, spec.dim)
    out = np.zeros((X.shape[0], Y.shape[0]))
    for cl, nl in ((a_l, 0), (b_l, 1)):
        for cr, nr in ((a_r, 0), (b_r, 1)):
            c = cl * cr
            if c != 0.0:
                out += c * base_block(spec, X, Y, nl, nr, theta)
    return out


def eval_kernel(spec: KernelSpec, x, xp) -> float:
    return float(kernel_matrix(spec, as_points(x, spec.dim)[:1], as_points(xp, spec.dim)[:1])[0, 0])


def eval_operator_kernel(spec: KernelSpec, op_left: Operator, op_right: Operator, x, xp,
                         theta=None) -> float:
    X = as_points(x, spec.dim)[:1]
    Y = as_points(xp, spec.dim)[:1]
    return float(kernel_matrix(spec, X, Y, op_left, op_right, theta)[0, 0])


def eval_integral_kernel(base: KernelSpec, x, xp, quadrature_order: int | None = None) -> float:
    return eval_kernel(KernelSpec.integral(base, quadrature_order), x, xp)


def kernel_diagonal(spec: KernelSpec, X, theta=None) -> np.ndarray:
    """``k(x, x)`` for each row of ``X`` without forming the full matrix."""
    X = as_points(X, spec.dim)
    fam = spec.family
    if fam in (KernelFamily.WENDLAND_C0, KernelFamily.WENDLAND_C2, KernelFamily.SQUARED_EXPONENTIAL):
        return np.ones(X.shape[0])
    if fam is KernelFamily.NATURAL_POISSON_1D:
        x = X[:, 0]
        th = 1.0 if theta is None else float(theta)
        return green1d.natural_kernel_poisson_1d(x, x, spec.support_scale) / th ** 2
    return np.array([_integral_block(spec, X[i:i + 1], X[i:i + 1], 0, 0)[0, 0] for i in range(X.shape[0])])
