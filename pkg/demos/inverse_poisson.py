"""Posterior for theta in theta u'' = g from two noisy point values.

The plug-in likelihood ignores solver uncertainty and becomes overconfident
on coarse designs; the marginal (PMM) likelihood widens accordingly.
"""

from probmeshless import experiments as ex
from probmeshless.inverse import LogGaussian
from probmeshless.kernels import KernelSpec
from probmeshless.problems import parametric_poisson_1d

problem = parametric_poisson_1d()
obs = ex.synthetic_observations(problem, [0.25, 0.75], 1.0, 0.001, seed=0)
rows = ex.linear_inverse_study(problem, KernelSpec.natural_poisson_1d(2.5), [5, 10, 20, 40, 80], obs,
                               LogGaussian(0.0, 1.0), "grid", grid=ex.theta_grid(0.2, 5.0, 2000))
print(f"{'m':>3} {'likelihood':>10} {'mean':>8} {'sd':>8} covers 1")
for r in rows:
    print(f"{r.m:>3} {r.likelihood:>10} {r.mean:8.4f} {r.sd:8.4f} {abs(r.mean - 1.0) <= r.sd}")
