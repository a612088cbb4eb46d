"""pCN and pseudo-marginal Metropolis-Hastings samplers, traces and diagnostics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .priors import gaussian_reference

logger = logging.getLogger(__name__)


@dataclass
class ChainTrace:
    """MCMC output; every per-iteration field has one entry per stored state."""

    samples: np.ndarray
    log_like: np.ndarray
    accepted: np.ndarray
    rng_seed: int
    solution_indices: Optional[np.ndarray] = None
    lengthscales: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.samples)
        for name in ("log_like", "accepted", "solution_indices", "lengthscales"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise ValueError(f"trace field {name} has length {len(v)}, expected {n}")

    def __len__(self):
        return len(self.samples)

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if len(self.accepted) else float("nan")

    def burned(self, burn: int) -> "ChainTrace":
        sl = slice(burn, None)
        return ChainTrace(self.samples[sl], self.log_like[sl], self.accepted[sl], self.rng_seed,
                          None if self.solution_indices is None else self.solution_indices[sl],
                          None if self.lengthscales is None else self.lengthscales[sl], dict(self.meta))

    def to_csv(self, path) -> None:
        """Write ``iter,theta,loglike,accepted,solution_index,lengthscale`` plus a seed sidecar."""
        path = Path(path)
        theta = np.asarray(self.samples)
        with open(path, "w") as fh:
            fh.write("iter,theta,loglike,accepted,solution_index,lengthscale\n")
            for i in range(len(theta)):
                th = theta[i]
                th_s = repr(float(th)) if np.ndim(th) == 0 else ";".join(repr(float(v)) for v in np.ravel(th))
                si = "" if self.solution_indices is None else str(int(self.solution_indices[i]))
                ls = "" if self.lengthscales is None else repr(float(self.lengthscales[i]))
                fh.write(f"{i},{th_s},{float(self.log_like[i])!r},{int(bool(self.accepted[i]))},{si},{ls}\n")
        meta = {"rng_seed": int(self.rng_seed), "iterations": len(theta),
                "acceptance_rate": self.acceptance_rate, **self.meta}
        path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def from_csv(cls, path) -> "ChainTrace":
        path = Path(path)
        rows = [line.rstrip("\n").split(",") for line in open(path)][1:]
        theta = np.array([float(r[1]) for r in rows])
        ll = np.array([float(r[2]) for r in rows])
        acc = np.array([r[3] == "1" for r in rows])
        si = None if not rows or rows[0][4] == "" else np.array([int(r[4]) for r in rows])
        ls = None if not rows or rows[0][5] == "" else np.array([float(r[5]) for r in rows])
        meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
        return cls(theta, ll, acc, meta.pop("rng_seed"), si, ls, meta)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def integrated_autocorr_time(x, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2 or np.var(x) == 0:
        return float("nan") if n < 2 else 1.0
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= c * taus
    m = int(np.argmax(window)) if np.any(window) else n - 1
    return float(max(taus[m], 1.0))


def effective_sample_size(x) -> float:
    x = np.asarray(x)
    return float(x.shape[0] / integrated_autocorr_time(x))


# --------------------------------------------------------------------------
# pCN
# --------------------------------------------------------------------------


def pcn_sample(model, potential: Callable, lam: float, iters: int, seed: int, xi0=None) -> ChainTrace:
    """Preconditioned Crank-Nicolson on the Gaussian behind ``model``.

    ``potential(theta)`` is the negative log-likelihood; the proposal
    ``xi* = m + sqrt(1 - lam^2)(xi - m) + lam C^1/2 w`` leaves the prior
    invariant, so acceptance only involves the potential difference.
    """
    if not 0 < lam <= 1:
        raise ValueError("pCN step lam must lie in (0, 1]")
    mean, root, transform = gaussian_reference(model)
    rng = np.random.default_rng(seed)
    rho = np.sqrt(1.0 - lam * lam)
    xi = mean.copy() if xi0 is None else np.array(xi0, dtype=float).reshape(mean.shape)
    theta = transform(xi)
    phi = float(potential(theta))
    samples, lls, acc = [], np.empty(iters), np.zeros(iters, dtype=bool)
    for i in range(iters):
        prop = mean + rho * (xi - mean) + lam * (root @ rng.standard_normal(mean.shape[0]))
        theta_p = transform(prop)
        phi_p = float(potential(theta_p))
        if np.log(rng.random()) < phi - phi_p:
            xi, theta, phi = prop, theta_p, phi_p
            acc[i] = True
        samples.append(theta)
        lls[i] = -phi
    logger.info("pCN: %d iterations, acceptance %.3f", iters, acc.mean() if iters else float("nan"))
    return ChainTrace(np.array(samples), lls, acc, seed)


# --------------------------------------------------------------------------
# pseudo-marginal Metropolis-Hastings
# --------------------------------------------------------------------------


def pseudo_marginal_mh(log_prior: Callable, log_estimate: Callable, moves, x0, iters: int, seed: int):
    """Generic pseudo-marginal Metropolis-within-Gibbs.

    ``moves`` is a sequence of ``(propose, log_q_ratio)`` pairs applied in turn
    every iteration (a single callable is accepted as one move with a
    symmetric proposal).  ``propose(x, rng)`` draws from ``q(. | x)``,
    ``log_q_ratio(x, x*)`` is ``log q(x | x*) - log q(x* | x)`` or ``None``.
    ``log_estimate(x, rng)`` returns the log of a non-negative unbiased
    likelihood estimate (``-inf`` for zero) from the dedicated estimator
    stream.  The current estimate is carried along and reused after a
    rejection.  Returns ``(states, log_estimates, accepted)`` where
    ``accepted[i, k]`` records move ``k`` at iteration ``i``.
    """
    if callable(moves):
        moves = [(moves, None)]
    proposal_rng, estimator_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    x = x0
    lp = log_prior(x)
    if not np.isfinite(lp):
        raise ValueError("initial state has zero prior density")
    ll = log_estimate(x, estimator_rng)
    states, lls = [], np.empty(iters)
    acc = np.zeros((iters, len(moves)), dtype=bool)
    for i in range(iters):
        for k, (propose, log_q_ratio) in enumerate(moves):
            x_new = propose(x, proposal_rng)
            lp_new = log_prior(x_new)
            u = proposal_rng.random()
            if not np.isfinite(lp_new):
                continue
            ll_new = log_estimate(x_new, estimator_rng)
            log_alpha = lp_new - lp + ll_new - ll
            if log_q_ratio is not None:
                log_alpha += log_q_ratio(x, x_new)
            if np.log(u) < log_alpha:
                x, lp, ll = x_new, lp_new, ll_new
                acc[i, k] = True
        states.append(x)
        lls[i] = ll
    return states, lls, acc


def random_walk_metropolis(log_target: Callable, x0: float, proposal_sd: float, iters: int, seed: int):
    """Plain Gaussian random-walk Metropolis on a scalar, with the same stream layout as above."""
    proposal_rng, _ = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    x, lt = float(x0), log_target(x0)
    out, acc = np.empty(iters), np.zeros(iters, dtype=bool)
    for i in range(iters):
        y = x + proposal_sd * proposal_rng.standard_normal()
        u = proposal_rng.random()
        lt_y = log_target(y)
        if np.log(u) < lt_y - lt:
            x, lt = y, lt_y
            acc[i] = True
        out[i] = x
    return out, acc
