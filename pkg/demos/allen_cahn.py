"""Allen-Cahn parameter inference with three solution branches (short chains).

Pass a larger iteration count on the command line for a closer look, e.g.
``python allen_cahn.py 10000`` (a few minutes per chain).
"""

import sys

import numpy as np

from probmeshless import experiments as ex
from probmeshless.geometry import Box
from probmeshless.kernels import KernelSpec
from probmeshless.problems import allen_cahn_2d, crude_solutions, discrete_residual

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 1000

for s in crude_solutions(None, 0.04, 20, seed=0):
    print(f"{s.label:>16}: mean {s.mean():+.3f}, residual {discrete_residual(s):.1e}")

obs = ex.allen_cahn_observations(0.04, 4, 0.1, 60, 0)
setup = ex.allen_cahn_setup(obs, None, 27, 20, 0)
design = ex.default_design(allen_cahn_2d(), KernelSpec.squared_exponential(0.15, Box.unit(2)), 20)
bins = np.linspace(0.02, 0.15, 27)
for lik in ("pmm", "plugin"):
    chain = ex.allen_cahn_chain(setup, design, lik, 0.15, iters, iters // 5, 0.01, 0.06, seed=0)
    print(f"{lik:>7}: mode {chain.mode(bins):.4f}, mean {chain.mean:.4f}, sd {chain.sd:.4f}, "
          f"acceptance {chain.trace.acceptance_rate:.2f}")
