"""Forward solve of u'' = g on (0, 1): natural kernel against an integral-type Wendland kernel."""

from probmeshless import experiments as ex
from probmeshless.geometry import Box
from probmeshless.kernels import KernelSpec
from probmeshless.problems import poisson_1d

problem = poisson_1d()
kernels = {
    "natural": KernelSpec.natural_poisson_1d(2.5),
    "integral": KernelSpec.integral(KernelSpec.wendland_c2(2.5, Box.unit(1))),
}
print(f"{'kernel':>9} {'m':>4} {'L2 error':>10} {'int var':>10}")
for name, kern in kernels.items():
    for r in ex.forward_study(problem, kern, [10, 20, 40, 80]):
        print(f"{name:>9} {r.m:>4} {r.l2_error:10.3e} {r.variance_l1:10.3e}")
