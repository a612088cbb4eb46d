"""A-optimal placement of five collocation points by coordinate exchange."""

import numpy as np

from probmeshless.collocation import Design
from probmeshless.design import coordinate_exchange, linear_design_problem, random_search
from probmeshless.geometry import Box
from probmeshless.kernels import KernelSpec
from probmeshless.problems import poisson_1d

prob = linear_design_problem(KernelSpec.natural_poisson_1d(2.5), poisson_1d().operators)
init = Design(np.random.default_rng(0).uniform(0.02, 0.98, 5)[:, None], np.zeros((0, 1)), Box.unit(1))
res = coordinate_exchange(prob, init, None, sweeps=3, seed=0)
print("initial points  ", np.round(np.sort(init.interior_points.ravel()), 3))
print("optimised points", np.round(res.design.interior_points.ravel(), 3))
print("loss trace      ", [f"{v:.3e}" for v in res.loss_trace])
_, best = random_search(prob, init, 2000, seed=1)
print(f"best of 2000 random designs {best:.3e}")
