"""Quick oracle and property checks runnable from the command line.

Each check is small enough that the whole suite runs in well under a minute.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.spatial.distance import cdist

from .collocation import Design, condition, fill_distance, local_error_bound_check
from .geometry import Box
from .green1d import green_poisson_1d, natural_kernel_poisson_1d, wendland_c0
from .inverse.likelihood import ObservationSet, marginal_log_likelihood
from .inverse.mcmc import integrated_autocorr_time, pcn_sample
from .inverse.priors import Gaussian, ScalarParameter
from .kernels import IDENTITY, LAPLACIAN, KernelSpec, kernel_matrix

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def natural_kernel_by_quadrature(x: float, xp: float, eps: float) -> float:
    """Nested adaptive quadrature of ``G(x, z) G(x', w) Lambda(z, w)``, split at every kink."""
    r = 1.0 / eps

    def inner(z):
        pts = sorted({p for p in (xp, z, z - r, z + r) if 0.0 < p < 1.0})
        f = lambda w: green_poisson_1d(xp, w) * wendland_c0(z, w, eps)  # noqa: E731
        return integrate.quad(f, 0.0, 1.0, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]

    pts = sorted({p for p in (x, xp, xp - r, xp + r, r, 1.0 - r) if 0.0 < p < 1.0})
    outer = lambda z: green_poisson_1d(x, z) * inner(z)  # noqa: E731
    return integrate.quad(outer, 0.0, 1.0, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


def dense_gaussian_loglik(y, mean, cov) -> float:
    return float(stats.multivariate_normal(mean=mean, cov=cov, allow_singular=False).logpdf(y))


def _check_natural_kernel():
    eps = 2.5
    rng = np.random.default_rng(11)
    pts = (np.arange(5)[:, None] + rng.random((5, 2))) / 5.0
    err = max(abs(float(natural_kernel_poisson_1d(a, b, eps)) - natural_kernel_by_quadrature(a, b, eps))
              for a, b in pts)
    return err < 1e-8, f"max |closed form - quadrature| = {err:.2e} at {len(pts)} points"


def _check_integral_kernel():
    base = KernelSpec.wendland_c0(3.0)
    spec = KernelSpec.integral(base)
    pairs = [(0.1, 0.2), (0.5, 0.5), (0.3, 0.9), (0.05, 0.4)]
    worst = 0.0
    for a, b in pairs:
        f = lambda z: wendland_c0(a, z, 3.0) * wendland_c0(z, b, 3.0)  # noqa: E731
        pts = sorted({p for p in (a, b, a - 1 / 3, a + 1 / 3, b - 1 / 3, b + 1 / 3) if 0 < p < 1})
        ref = integrate.quad(f, 0.0, 1.0, points=pts, epsabs=1e-14, epsrel=1e-13)[0]
        val = kernel_matrix(spec, [[a]], [[b]])[0, 0]
        worst = max(worst, abs(val - ref))
    return worst < 1e-10, f"max |Gauss-Legendre - adaptive quadrature| = {worst:.2e}"


def _check_dense_likelihood():
    rng = np.random.default_rng(5)
    kern = KernelSpec.squared_exponential(0.3)
    design = Design(np.linspace(0.1, 0.9, 6)[:, None], np.array([[0.0], [1.0]]), Box.unit(1))
    p = condition(kern, [(LAPLACIAN, design.interior_points), (IDENTITY, design.boundary_points)],
                  rng.standard_normal(8), design=design)
    X = rng.random((4, 1))
    obs = ObservationSet(X, rng.standard_normal(4), 0.05)
    ref = dense_gaussian_loglik(obs.values, p.mean(X), p.cov(X) + obs.gamma)
    err = abs(marginal_log_likelihood(p, obs) - ref)
    return err < 1e-6, f"|marginal - dense| = {err:.2e}"


def _check_pcn_prior():
    iters = 20_000
    tr = pcn_sample(ScalarParameter(Gaussian(0.0, 1.0)), lambda t: 0.0, 0.5, iters, seed=3)
    s = np.asarray(tr.samples, dtype=float).ravel()
    tau = integrated_autocorr_time(s)
    se_mean = np.sqrt(tau / iters)
    se_var = np.sqrt(2.0 * tau / iters)
    ok = abs(s.mean()) < 3 * se_mean and abs(s.var() - 1.0) < 3 * se_var
    return ok, f"mean {s.mean():+.4f} (3se {3 * se_mean:.4f}), var {s.var():.4f} (3se {3 * se_var:.4f})"


def _check_gram():
    rng = np.random.default_rng(2)
    kern = KernelSpec.squared_exponential(0.4, Box.unit(2))
    P = rng.random((15, 2))
    B = np.column_stack([rng.random(6), np.zeros(6)])
    blocks = [(LAPLACIAN, P), (IDENTITY, B)]
    G = np.vstack([np.hstack([kernel_matrix(kern, Pi, Pj, Li, Lj) for Lj, Pj in blocks]) for Li, Pi in blocks])
    asym = np.max(np.abs(G - G.T)) / np.max(np.abs(G))
    lam = np.linalg.eigvalsh(0.5 * (G + G.T)).min() / np.trace(G)
    return asym < 1e-12 and lam > -1e-12, f"asymmetry {asym:.1e}, min eigenvalue/trace {lam:.1e}"


def _check_interpolation():
    kern = KernelSpec.wendland_c2(2.0, Box.unit(2))
    rng = np.random.default_rng(4)
    X = rng.random((25, 2))
    f = np.sin(3 * X[:, 0]) * np.cos(2 * X[:, 1])
    p = condition(kern, [(IDENTITY, X)], f)
    err = np.max(np.abs(p.mean(X) - f))
    return err < 1e-8, f"max interpolation residual {err:.2e}"


def _check_nested():
    kern = KernelSpec.natural_poisson_1d(2.5)
    X = np.linspace(0, 1, 101)[:, None]
    prev, ok = None, True
    for m in (3, 6, 12):
        # the sets j/(m+1) are nested when m + 1 doubles
        P = (np.arange(1, m + 1) / (m + 1.0))[:, None]
        v = condition(kern, [(LAPLACIAN, P)], np.zeros(m)).variance(X)
        if prev is not None:
            ok &= bool(np.all(v <= prev + 1e-12))
        prev = v
    return ok, "variance non-increasing along nested designs 3 < 6 < 12"


def _check_bound():
    kern = KernelSpec.squared_exponential(0.25)
    design = Design(np.linspace(0.05, 0.95, 8)[:, None], np.array([[0.0], [1.0]]), Box.unit(1))
    p = condition(kern, [(LAPLACIAN, design.interior_points), (IDENTITY, design.boundary_points)], np.zeros(10),
                  design=design)
    rng = np.random.default_rng(8)
    violations = 0
    for _ in range(10):
        rep = rng.random((4, 1))
        rep_report = local_error_bound_check(p, rng.standard_normal(4), rep)
        violations += rep_report.n_violations
    return violations == 0, f"{violations} violations over 10 representer-span functions"


def _check_fill_distance():
    rng = np.random.default_rng(9)
    design = Design(rng.random((12, 2)) * 0.98 + 0.01, np.zeros((0, 2)), Box.unit(2))
    grid = Box.unit(2).grid(60)
    brute = float(np.max(np.min(cdist(grid, design.points), axis=1)))
    fast = fill_distance(design, grid)
    return abs(brute - fast) < 1e-14, f"tree {fast:.6f} vs brute force {brute:.6f}"


def _check_derivatives():
    kern = KernelSpec.squared_exponential(0.5, Box.unit(2))
    x = np.array([[0.3, 0.6]])
    y = np.array([[0.5, 0.4]])
    h = 1e-3
    shifts = np.array([[h, 0], [-h, 0], [0, h], [0, -h]])
    k = lambda a: kernel_matrix(kern, a, y)[0, 0]  # noqa: E731
    fd = (sum(k(x + s) for s in shifts) - 4 * k(x)) / h ** 2
    exact = kernel_matrix(kern, x, y, LAPLACIAN, IDENTITY)[0, 0]
    rel = abs(fd - exact) / max(abs(exact), 1.0)
    return rel < 1e-5, f"relative error of the Laplacian against central differences {rel:.1e}"


CHECKS = {
    "natural_kernel_quadrature": _check_natural_kernel,
    "integral_kernel_quadrature": _check_integral_kernel,
    "dense_likelihood_oracle": _check_dense_likelihood,
    "pcn_prior_preservation": _check_pcn_prior,
    "gram_symmetric_psd": _check_gram,
    "interpolation_exactness": _check_interpolation,
    "nested_variance_monotone": _check_nested,
    "local_error_bound": _check_bound,
    "fill_distance_brute_force": _check_fill_distance,
    "laplacian_finite_difference": _check_derivatives,
}


def run_selftest(names=None) -> list[CheckResult]:
    """Run the named checks (all by default); a check that raises counts as failed."""
    names = list(names or CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown self-test checks: {', '.join(unknown)}")
    out = []
    for name in names:
        t0 = time.perf_counter()
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crash is a failure, reported not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        detail = f"{detail} [{time.perf_counter() - t0:.1f}s]"
        logger.info("%s: %s", name, detail)
        out.append(CheckResult(name, bool(ok), detail))
    return out
