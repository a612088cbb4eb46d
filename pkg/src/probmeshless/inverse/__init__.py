"""Bayesian inversion with the solver's uncertainty propagated into the likelihood."""

from .calibration import CalibrationResult, calibrate_empirical_bayes
from .likelihood import (GridPosterior, ObservationSet, gaussian_logpdf, grid_posterior, likelihood_gap,
                         marginal_log_likelihood, plug_in_log_likelihood)
from .mcmc import (ChainTrace, effective_sample_size, integrated_autocorr_time, pcn_sample, pseudo_marginal_mh,
                   random_walk_metropolis)
from .priors import (FieldParameter, Gaussian, HalfCauchy, LogGaussian, PointMass, ScalarParameter, Uniform,
                     gaussian_reference, make_prior)
from .semilinear import (Estimate, GaussianImportance, LatentLikelihood, MixtureImportance, SemiLinearInverseProblem, SolutionBank, laplace_importance,
                         latent_blocks, pseudo_marginal_estimate, pseudo_marginal_mcmc, semi_linear_posterior)

__all__ = [
    "CalibrationResult", "calibrate_empirical_bayes",
    "GridPosterior", "ObservationSet", "gaussian_logpdf", "grid_posterior", "likelihood_gap",
    "marginal_log_likelihood", "plug_in_log_likelihood",
    "ChainTrace", "effective_sample_size", "integrated_autocorr_time", "pcn_sample", "pseudo_marginal_mh",
    "random_walk_metropolis",
    "FieldParameter", "Gaussian", "HalfCauchy", "LogGaussian", "PointMass", "ScalarParameter", "Uniform",
    "gaussian_reference", "make_prior",
    "Estimate", "GaussianImportance", "LatentLikelihood", "MixtureImportance", "SemiLinearInverseProblem", "SolutionBank", "laplace_importance",
    "latent_blocks", "pseudo_marginal_estimate", "pseudo_marginal_mcmc", "semi_linear_posterior",
]
