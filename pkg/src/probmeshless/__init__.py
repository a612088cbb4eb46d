"""Probabilistic meshless solvers for elliptic PDEs.

Symmetric collocation read as Gaussian conditioning: the conditional mean is
the usual meshless approximation and the conditional covariance measures how
much the collocation constraints leave undetermined.  That covariance feeds
inverse problems (:mod:`probmeshless.inverse`) and the placement of
collocation points (:mod:`probmeshless.design`).
"""

import logging

from .collocation import (CollocationPosterior, Design, OperatorSet, SemiLinearSplit, assemble, condition,
                          fill_distance, local_error_bound_check, posterior_cov, posterior_mean, sample_solution,
                          uniform_design_1d)
from .errors import (CalibrationError, ConfigurationError, DomainError, IllConditionedDesignError,
                     MultiplicityError, NumericalError, OracleError, ProbMeshlessError, UnsupportedOperatorError,
                     UnsupportedPriorError)
from .geometry import Box, Disc
from .kernels import (BOUNDARY_TRACE, IDENTITY, LAPLACIAN, Coefficient, KernelFamily, KernelSpec, Operator,
                      kernel_matrix, linear_combination, scaled_laplacian)
from .problems import ProblemDefinition, crude_solutions, get_problem

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "CollocationPosterior", "Design", "OperatorSet", "SemiLinearSplit", "assemble", "condition", "fill_distance",
    "local_error_bound_check", "posterior_cov", "posterior_mean", "sample_solution", "uniform_design_1d",
    "CalibrationError", "ConfigurationError", "DomainError", "IllConditionedDesignError", "MultiplicityError",
    "NumericalError", "OracleError", "ProbMeshlessError", "UnsupportedOperatorError", "UnsupportedPriorError",
    "Box", "Disc", "BOUNDARY_TRACE", "IDENTITY", "LAPLACIAN", "Coefficient", "KernelFamily", "KernelSpec",
    "Operator", "kernel_matrix", "linear_combination", "scaled_laplacian",
    "ProblemDefinition", "crude_solutions", "get_problem",
]
