"""Conditional-mean estimation for the Poisson noise channel Y | X ~ Poisson(aX + lambda)."""
from .channel import ChannelParams, OutputPmf, PmfRoute, output_pmf, sample_channel
from .errors import PoissonCMEError
from .estimator import (
    EmpiricalCounts,
    EstimatorCurve,
    Route,
    closed_form_mean,
    empirical_bayes_mean,
    estimator_curve,
    posterior_mean_direct,
    posterior_mean_laplace,
    posterior_mean_tgr,
    posterior_moment,
    posterior_variance,
)
from .priors import (
    Bernoulli,
    Degenerate,
    Discrete,
    Gamma,
    InverseGamma,
    Mixture,
    PoissonPrior,
    Prior,
    Uniform,
    exponential,
    prior_from_dict,
    prior_from_json,
)
from .score import fisher_information, mmse, score

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "OutputPmf", "PmfRoute", "output_pmf", "sample_channel",
    "PoissonCMEError",
    "EmpiricalCounts", "EstimatorCurve", "Route", "closed_form_mean", "empirical_bayes_mean",
    "estimator_curve", "posterior_mean_direct", "posterior_mean_laplace", "posterior_mean_tgr",
    "posterior_moment", "posterior_variance",
    "Bernoulli", "Degenerate", "Discrete", "Gamma", "InverseGamma", "Mixture", "PoissonPrior",
    "Prior", "Uniform", "exponential", "prior_from_dict", "prior_from_json",
    "fisher_information", "mmse", "score",
]
