"""Command-line experiment runner.

``probmeshless <command> --config PATH --out DIR [--seed N]`` with commands
``forward``, ``inverse``, ``design``, ``allen-cahn`` and ``selftest``.
Every command writes CSV files only.  Exit status is 0 on success, 2 for a
bad configuration and 3 for a numerical failure.

CSV schemas
-----------
forward
    ``solution.csv``: ``x,mu,sigma2[,exact]``; ``samples.csv``: ``x,sample_1,...``;
    ``convergence.csv`` (several ``design.m``): ``m,l2_error,sigma2_l1``.
inverse
    ``posterior_m<m>.csv``: ``theta,<likelihood>...`` (grid inference) or
    ``trace_m<m>_<likelihood>.csv`` (MCMC); ``credible_intervals.csv``:
    ``m,method,mean,sd``.
design
    ``design_initial.csv``, ``design_optimised.csv`` (``x1[,x2],role``) and
    ``loss_trace.csv``: ``sweep,loss``.
allen-cahn
    ``crude_<label>.csv`` (spaces in the label become underscores): ``x1,x2,u``; ``crude_summary.csv``;
    ``observations.csv``; ``trace_m<m>_<likelihood>.csv``;
    ``posterior_m<m>.csv``: ``bin_lo,bin_hi,pmm,plugin``; ``summary.csv``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import experiments as ex
from .collocation import Design
from .config import ExperimentConfig, dump_config, load_config
from .design import A_OPTIMAL
from .errors import ConfigurationError, DomainError, NumericalError, UnsupportedPriorError
from .inverse.likelihood import ObservationSet
from .inverse.priors import HalfCauchy, make_prior
from .kernels import KernelSpec
from .problems import crude_solutions, get_problem

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


# --------------------------------------------------------------------------
# config helpers
# --------------------------------------------------------------------------


def _write_csv(path: Path, header: list[str], columns) -> Path:
    """Columns of equal length; floats written with full precision for reproducibility."""
    rows = zip(*columns)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else repr(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row) + "\n")
    return path


def _seed(cfg: ExperimentConfig) -> int:
    seed = cfg.get("seed")
    if seed is None:
        raise ConfigurationError(f"{cfg.source}: field 'seed' is required for synthetic data or MCMC")
    return seed


def build_kernel(cfg: ExperimentConfig, problem) -> KernelSpec:
    domain = problem.domain
    default = "squared_exponential" if domain.dim == 2 else "natural_poisson_1d"
    family = cfg.get("kernel.family", default)
    scale = cfg.get("kernel.support_scale", 2.5)
    try:
        if family == "natural_poisson_1d":
            return KernelSpec.natural_poisson_1d(scale)
        if family == "squared_exponential":
            return KernelSpec.squared_exponential(cfg.get("kernel.length_scale", 0.15), domain)
        if family == "wendland_c0":
            return KernelSpec.wendland_c0(scale, domain)
        if family == "wendland_c2":
            return KernelSpec.wendland_c2(scale, domain)
        base_family = cfg.get("kernel.base", "wendland_c2")
        base = getattr(KernelSpec, base_family)(scale, domain)
        return KernelSpec.integral(base, cfg.get("kernel.quadrature_order"), domain)
    except ConfigurationError as exc:
        raise cfg.error("kernel.family", str(exc)) from None


def _problem(cfg: ExperimentConfig, default: str):
    return get_problem(cfg.get("problem", default))


def _design_for(cfg: ExperimentConfig, problem, kernel, m: int) -> Design:
    source = cfg.get("design.source", "uniform")
    if source == "file":
        return Design.from_csv(cfg.require("design.file"), problem.domain)
    if problem.domain.dim == 2:
        design = ex.default_design(problem, kernel, m, cfg.get("design.boundary_per_edge", 4))
    else:
        design = ex.default_design(problem, kernel, m)
    if source == "optimise":
        res = ex.design_study(problem, kernel, design, cfg.get("design.theta"), cfg.get("design.sweeps", 3),
                              cfg.get("design.candidates", 21), cfg.get("design.loss", A_OPTIMAL),
                              cfg.get("seed", 0))
        design = res.design
    return design


def _prior(cfg: ExperimentConfig, default_kind: str, a=None, b=None):
    kind = cfg.get("prior.kind", default_kind)
    try:
        return make_prior(kind, cfg.get("prior.a", a), cfg.get("prior.b", b))
    except ConfigurationError as exc:
        raise cfg.error("prior.kind", str(exc)) from None


def _observations(cfg: ExperimentConfig, problem, locations, gamma: float, theta_true: float) -> ObservationSet:
    locs = np.asarray(cfg.get("observation.locations", locations), dtype=float)
    if problem.domain.dim == 2:
        locs = locs.reshape(-1, 2)
    if "observation.gamma_file" in cfg:
        noise = np.atleast_2d(np.loadtxt(cfg.get("observation.gamma_file"), delimiter=","))
    else:
        sd = cfg.get("observation.gamma", gamma)
        noise = sd ** 2
    if "observation.data_file" in cfg:
        y = np.atleast_1d(np.loadtxt(cfg.get("observation.data_file"), delimiter=","))
        return ObservationSet(locs, y, noise)
    theta_true = cfg.get("observation.theta_true", theta_true)
    if np.ndim(noise) == 0:
        return ex.synthetic_observations(problem, locs, theta_true, float(np.sqrt(noise)), _seed(cfg))
    clean = problem.exact_solution(locs.reshape(-1, problem.domain.dim), theta_true)
    if noise.shape != (clean.shape[0], clean.shape[0]):
        raise cfg.error("observation.gamma_file", f"expected a {clean.shape[0]} x {clean.shape[0]} matrix")
    e = np.linalg.cholesky(noise) @ np.random.default_rng(_seed(cfg)).standard_normal(clean.shape[0])
    return ObservationSet(locs, clean + e, noise)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_forward(cfg: ExperimentConfig, out: Path) -> list[Path]:
    problem = _problem(cfg, "poisson_1d")
    kernel = build_kernel(cfg, problem)
    theta = cfg.get("forward.theta", 1.0 if problem.parametric else None)
    grid = cfg.get("forward.grid", 100)
    ms = cfg.get("design.m", [10])
    files = []
    results = []
    for m in ms:
        design = _design_for(cfg, problem, kernel, m)
        res, _ = ex.forward_solve(problem, kernel, design, theta, grid)
        results.append(res)
    last = results[-1]
    cols = [last.x, last.mean, last.variance] + ([] if last.exact is None else [last.exact])
    header = ["x", "mu", "sigma2"] + ([] if last.exact is None else ["exact"])
    files.append(_write_csv(out / "solution.csv", header, cols))
    count = cfg.get("forward.samples", 5)
    x, S = ex.forward_samples(problem, kernel, _design_for(cfg, problem, kernel, ms[-1]), theta, grid, count,
                              cfg.get("seed", 0))
    files.append(_write_csv(out / "samples.csv", ["x"] + [f"sample_{k + 1}" for k in range(count)],
                            [x] + list(S)))
    if len(ms) > 1:
        files.append(_write_csv(out / "convergence.csv", ["m", "l2_error", "sigma2_l1"],
                                [[r.m for r in results], [r.l2_error for r in results],
                                 [r.variance_l1 for r in results]]))
    return files


def cmd_inverse(cfg: ExperimentConfig, out: Path) -> list[Path]:
    problem = _problem(cfg, "parametric_poisson_1d")
    if not problem.parametric or problem.is_semi_linear:
        raise cfg.error("problem", "the inverse command needs a parametric linear problem "
                                   "(use allen-cahn for the semi-linear case)")
    kernel = build_kernel(cfg, problem)
    obs = _observations(cfg, problem, [0.25, 0.75], 0.001, 1.0)
    prior = _prior(cfg, "log_gaussian", 0.0, 1.0)
    method = cfg.get("inference.method", "grid")
    likelihoods = cfg.get("inference.likelihoods", list(ex.LIKELIHOODS))
    for lik in likelihoods:
        if lik not in ex.LIKELIHOODS:
            raise cfg.error("inference.likelihoods", f"unknown likelihood {lik!r}")
    if method != "grid":
        _seed(cfg)
    ms = cfg.get("design.m", [5, 10, 20, 40, 80])
    grid = ex.theta_grid(cfg.get("inference.grid_lo", 0.2), cfg.get("inference.grid_hi", 5.0),
                         cfg.get("inference.grid_n", 2000))
    lengthscale = cfg.get("inference.lengthscale", "fixed")
    try:
        summaries = ex.linear_inverse_study(
            problem, kernel, ms, obs, prior, method, likelihoods, grid, cfg.get("inference.iters", 5000),
            cfg.get("inference.burn", 1000), cfg.get("inference.lam", 0.3), cfg.get("inference.proposal_sd", 0.1),
            cfg.get("seed", 0), cfg.get("inference.theta0", 1.0), lengthscale,
            cfg.get("inference.lengthscale_scale", 1.0), cfg.get("inference.lengthscale_proposal_sd", 0.2))
    except UnsupportedPriorError as exc:
        raise cfg.error("prior.kind", str(exc)) from None
    files = []
    for m in ms:
        rows = [s for s in summaries if s.m == m]
        if method == "grid":
            files.append(_write_csv(out / f"posterior_m{m}.csv", ["theta"] + [s.likelihood for s in rows],
                                    [grid] + [s.posterior.density for s in rows]))
        else:
            for s in rows:
                path = out / f"trace_m{m}_{s.likelihood}.csv"
                s.trace.to_csv(path)
                files.append(path)
    files.append(_write_csv(out / "credible_intervals.csv", ["m", "method", "mean", "sd"],
                            [[s.m for s in summaries], [s.likelihood for s in summaries],
                             [s.mean for s in summaries], [s.sd for s in summaries]]))
    return files


def cmd_design(cfg: ExperimentConfig, out: Path) -> list[Path]:
    problem = _problem(cfg, "poisson_1d")
    kernel = build_kernel(cfg, problem)
    default_theta = 0.04 if problem.is_semi_linear else (1.0 if problem.parametric else None)
    theta = cfg.get("design.theta", default_theta)
    if cfg.get("design.source", "uniform") == "file":
        initial = Design.from_csv(cfg.require("design.file"), problem.domain)
    else:
        m = cfg.get("design.m", [20 if problem.is_semi_linear else 5])
        if len(m) != 1:
            raise cfg.error("design.m", "the design command takes a single design size")
        initial = ex.default_design(problem, kernel, m[0], cfg.get("design.boundary_per_edge", 4))
    res = ex.design_study(problem, kernel, initial, theta, cfg.get("design.sweeps", 3),
                          cfg.get("design.candidates", 21), cfg.get("design.loss", A_OPTIMAL), cfg.get("seed", 0))
    initial.to_csv(out / "design_initial.csv")
    res.design.to_csv(out / "design_optimised.csv")
    trace = _write_csv(out / "loss_trace.csv", ["sweep", "loss"],
                       [list(range(len(res.loss_trace))), res.loss_trace])
    return [out / "design_initial.csv", out / "design_optimised.csv", trace]


def cmd_allen_cahn(cfg: ExperimentConfig, out: Path) -> list[Path]:
    problem = _problem(cfg, "allen_cahn_2d")
    if problem.name != "allen_cahn_2d":
        raise cfg.error("problem", "the allen-cahn command only runs allen_cahn_2d")
    seed = _seed(cfg)
    theta = cfg.get("allen_cahn.theta", 0.04)
    grid_n = cfg.get("allen_cahn.grid_n", 20)
    files = []
    sols = crude_solutions(problem, theta, grid_n, seed)
    for s in sols:
        X1, X2 = np.meshgrid(s.nodes, s.nodes, indexing="ij")
        files.append(_write_csv(out / f"crude_{s.label.replace(' ', '_')}.csv", ["x1", "x2", "u"],
                                [X1.ravel(), X2.ravel(), s.values.ravel()]))
    files.append(_write_csv(out / "crude_summary.csv", ["label", "theta", "mean", "residual", "iterations"],
                            [[s.label for s in sols], [s.theta for s in sols], [s.mean() for s in sols],
                             [s.residual for s in sols], [s.iterations for s in sols]]))

    if "observation.data_file" in cfg:
        locs = np.asarray(cfg.require("observation.locations"), dtype=float).reshape(-1, 2)
        y = np.atleast_1d(np.loadtxt(cfg.get("observation.data_file"), delimiter=","))
        obs = ObservationSet(locs, y, cfg.get("observation.gamma", 0.1) ** 2)
    else:
        obs = ex.allen_cahn_observations(cfg.get("observation.theta_true", theta), cfg.get("observation.grid", 4),
                                         cfg.get("observation.gamma", 0.1), cfg.get("observation.fine_grid_n", 60),
                                         seed)
    files.append(_write_csv(out / "observations.csv", ["x1", "x2", "y"],
                            [obs.locations[:, 0], obs.locations[:, 1], obs.values]))

    prior = _prior(cfg, "uniform", 0.02, 0.15)
    setup = ex.allen_cahn_setup(obs, prior, cfg.get("allen_cahn.bank_size", 27), grid_n, seed)
    kernel = build_kernel(cfg, problem)
    ell = ex.kernel_scale(kernel)
    mode = cfg.get("inference.lengthscale", "fixed")
    if mode == "empirical_bayes":
        raise cfg.error("inference.lengthscale", "empirical Bayes is not available for the semi-linear problem; "
                                                 "use fixed or half_cauchy")
    ell_prior = HalfCauchy(cfg.get("inference.lengthscale_scale", 1.0)) if mode == "half_cauchy" else None
    iters = cfg.get("inference.iters", 10_000)
    burn = cfg.get("inference.burn", min(2000, iters // 5))
    ms = cfg.get("design.m", [5, 10, 20])
    lo, hi = (prior.lo, prior.hi) if hasattr(prior, "lo") else (0.02, 0.15)
    bins = np.linspace(lo, hi, 27)
    summary = {"m": [], "method": [], "mode": [], "mean": [], "sd": [], "acceptance": [], "indices_visited": []}
    for m in ms:
        design = _design_for(cfg, problem, kernel, m)
        hists = {}
        for k, lik in enumerate(ex.LIKELIHOODS):
            chain_seed = int(np.random.SeedSequence([seed, m, k]).generate_state(1)[0])
            chain = ex.allen_cahn_chain(
                setup, design, lik, ell, iters, burn, cfg.get("inference.proposal_sd", 0.01),
                cfg.get("inference.theta0", 0.06), cfg.get("inference.importance", "laplace_mixture"),
                cfg.get("inference.importance_scale", 10.0), cfg.get("inference.n_importance", 500), chain_seed,
                ell_prior, cfg.get("inference.lengthscale_proposal_sd", 0.2))
            path = out / f"trace_m{m}_{lik}.csv"
            chain.trace.to_csv(path)
            files.append(path)
            hists[lik] = chain.histogram(bins)
            for key, val in (("m", m), ("method", lik), ("mode", chain.mode(bins)), ("mean", chain.mean),
                             ("sd", chain.sd), ("acceptance", chain.trace.acceptance_rate),
                             ("indices_visited", len(set(chain.trace.solution_indices.tolist())))):
                summary[key].append(val)
        files.append(_write_csv(out / f"posterior_m{m}.csv", ["bin_lo", "bin_hi", "pmm", "plugin"],
                                [bins[:-1], bins[1:], hists["pmm"], hists["plugin"]]))
    files.append(_write_csv(out / "summary.csv", list(summary), list(summary.values())))
    return files


def cmd_selftest(cfg: Optional[ExperimentConfig], out: Path) -> list[Path]:
    from .selftest import run_selftest
    results = run_selftest()
    path = _write_csv(out / "selftest.csv", ["check", "passed", "detail"],
                      [[r.name for r in results], [int(r.passed) for r in results], [r.detail for r in results]])
    failed = [r.name for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    if failed:
        raise NumericalError(f"self-test failures: {', '.join(failed)}")
    return [path]


COMMANDS = {
    "forward": cmd_forward,
    "inverse": cmd_inverse,
    "design": cmd_design,
    "allen-cahn": cmd_allen_cahn,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="probmeshless", description="Probabilistic meshless PDE experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=(name != "selftest"), help="experiment config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config is not None else None
        if cfg is None and args.command != "selftest":
            raise ConfigurationError("--config is required")
        if cfg is not None and args.seed is not None:
            cfg.set("seed", args.seed)
        out = args.out
        if cfg is not None and "output.dir" in cfg and args.out == Path("."):
            out = Path(cfg.get("output.dir"))
        out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](cfg, out)
        if cfg is not None:
            (out / "config.resolved").write_text(dump_config(cfg))
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        logger.info("wrote %s", f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
