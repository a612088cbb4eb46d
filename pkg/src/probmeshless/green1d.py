"""Natural kernel of the 1D Poisson problem on (0, 1) with Dirichlet data.

The forcing covariance is the C0 Wendland function

    Lambda(x, x') = (1 - eps |x - x'|)_+^2

and pushing it through the Green's function ``G`` of ``d^2/dx^2`` gives

    k(x, x') = int int G(x, z) G(x', z') Lambda(z, z') dz dz'.

``k`` is split into the four rectangle integrals I1..I4 obtained by cutting
each ``G`` at its kink.  Every rectangle integral is evaluated exactly: the
inner integral has a closed form (antiderivatives of the clipped quadratic),
which is a polynomial of degree <= 4 in the outer variable between the
points where the support of ``Lambda`` crosses the rectangle edges.  Splitting
the outer integral at those points and using a 4-node Gauss-Legendre rule per
piece integrates the resulting degree-5 polynomials exactly.
"""

from __future__ import annotations

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def _check_unit(*arrays):
    for a in arrays:
        if np.any((a < 0.0) | (a > 1.0)) or np.any(~np.isfinite(a)):
            raise ValueError("natural Poisson kernel arguments must lie in [0, 1]")


def wendland_c0(x, y, eps: float) -> np.ndarray:
    """The forcing covariance ``(1 - eps|x - y|)_+^2``."""
    t = np.maximum(1.0 - eps * np.abs(np.asarray(x, float) - np.asarray(y, float)), 0.0)
    return t * t


def green_poisson_1d(x, xp) -> np.ndarray:
    """Green's function of ``d^2/dx^2`` on (0, 1) with zero Dirichlet data.

    ``G(x, x') = min(x, x') (max(x, x') - 1)``; it vanishes for x in {0, 1}.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    _check_unit(x, xp)
    return np.minimum(x, xp) * (np.maximum(x, xp) - 1.0)


def _hat_moments(u, eps):
    # P(u) = int_0^u (1 - eps s)^2 ds,  Q(u) = int_0^u s (1 - eps s)^2 ds
    p = (1.0 - (1.0 - eps * u) ** 3) / (3.0 * eps)
    q = u * u * (0.5 - (2.0 / 3.0) * eps * u + 0.25 * eps * eps * u * u)
    return p, q


def _linear_against_lambda(a, b, c0, c1, z, eps):
    """Closed form of ``int_a^b (c0 + c1 w) Lambda(z, w) dw`` (broadcasting, a <= b)."""
    delta = 1.0 / eps
    base = c0 + c1 * z
    # w above z: w = z + u
    pa, qa = _hat_moments(np.clip(a - z, 0.0, delta), eps)
    pb, qb = _hat_moments(np.clip(b - z, 0.0, delta), eps)
    above = base * (pb - pa) + c1 * (qb - qa)
    # w below z: w = z - u
    pa, qa = _hat_moments(np.clip(z - b, 0.0, delta), eps)
    pb, qb = _hat_moments(np.clip(z - a, 0.0, delta), eps)
    below = base * (pb - pa) - c1 * (qb - qa)
    return above + below


def _rectangle_integral(z_lo, z_hi, p0, p1, w_lo, w_hi, q0, q1, eps):
    """``int_{z_lo}^{z_hi} (p0 + p1 z) int_{w_lo}^{w_hi} (q0 + q1 w) Lambda(z, w) dw dz``.

    All arguments broadcast to a common shape; the result has that shape.
    """
    delta = 1.0 / eps
    z_lo, z_hi, p0, p1, w_lo, w_hi, q0, q1 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (z_lo, z_hi, p0, p1, w_lo, w_hi, q0, q1)))
    kinks = np.stack([w_lo - delta, w_lo, w_lo + delta, w_hi - delta, w_hi, w_hi + delta], axis=-1)
    kinks = np.clip(kinks, z_lo[..., None], z_hi[..., None])
    edges = np.concatenate([z_lo[..., None], np.sort(kinks, axis=-1), z_hi[..., None]], axis=-1)
    left, right = edges[..., :-1], edges[..., 1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    # nodes: (..., panel, node)
    z = mid[..., None] + half[..., None] * _GL_NODES
    ex = (Ellipsis, None, None)
    inner = _linear_against_lambda(w_lo[ex], w_hi[ex], q0[ex], q1[ex], z, eps)
    integrand = (p0[ex] + p1[ex] * z) * inner
    return np.sum(half * np.sum(integrand * _GL_WEIGHTS, axis=-1), axis=-1)


def lambda_against_green(x, xp, eps: float) -> np.ndarray:
    """``H(x, x') = int_0^1 G(x', w) Lambda(x, w) dw``, i.e. ``d^2/dx^2 k(x, x')`` at theta = 1."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    _check_unit(x, xp)
    zero = np.zeros_like(x + xp)
    left = _linear_against_lambda(zero, xp + zero, 0.0, xp - 1.0, x, eps)
    right = _linear_against_lambda(xp + zero, 1.0 + zero, -xp, xp, x, eps)
    return left + right


def natural_kernel_poisson_1d(x, xp, eps: float, theta: float = 1.0) -> np.ndarray:
    """Natural kernel for ``theta d^2/dx^2`` on (0, 1), Dirichlet data, forcing covariance Lambda.

    Scaling the operator by ``theta`` scales the Green's function by ``1/theta``
    so ``k(.; theta) = theta^-2 k(.; 1)`` exactly.
    """
    if eps <= 0 or theta <= 0:
        raise ValueError("eps and theta must be positive")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    _check_unit(x, xp)
    x, xp = np.broadcast_arrays(x, xp)
    a = np.minimum(x, xp)
    b = np.maximum(x, xp)
    i1 = _rectangle_integral(0.0, a, 0.0, 1.0, 0.0, b, 0.0, 1.0, eps)
    i2 = _rectangle_integral(0.0, a, 0.0, 1.0, b, 1.0, -1.0, 1.0, eps)
    i3 = _rectangle_integral(a, 1.0, -1.0, 1.0, 0.0, b, 0.0, 1.0, eps)
    i4 = _rectangle_integral(a, 1.0, -1.0, 1.0, b, 1.0, -1.0, 1.0, eps)
    k = (a - 1.0) * (b - 1.0) * i1 + (a - 1.0) * b * i2 + a * (b - 1.0) * i3 + a * b * i4
    return k / theta ** 2


def natural_kernel_cross_terms(which: str, x, xp, eps: float, theta: float = 1.0) -> np.ndarray:
    """Operator-applied natural kernel for ``A = theta d^2/dx^2``.

    ``which`` is one of ``"AK"`` (A on the first argument), ``"AbarK"`` (A on the
    second argument) or ``"AAbarK"`` (both), giving ``H(x, x')/theta``,
    ``H(x', x)/theta`` and ``Lambda(x, x')`` respectively.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if which == "AK":
        return lambda_against_green(x, xp, eps) / theta
    if which == "AbarK":
        return lambda_against_green(xp, x, eps) / theta
    if which == "AAbarK":
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        _check_unit(x, xp)
        return wendland_c0(x, xp, eps)
    raise ValueError(f"unknown cross term {which!r}")
