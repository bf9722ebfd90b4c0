"""Asymptotic law of distances between sample covariance matrices."""

from .descriptors import (DescriptorSet, DistanceKind, GaussianLaw, cross_covariance,
                          deterministic_equivalent, gaussian_law, pair_from_ensemble,
                          second_order_mean, variance)
from .errors import (ConvergenceError, DomainError, GeometryError, NumericError, PoleError,
                     ScmAsymError, SingularityError)
from .model import (Ensemble, PopulationCovariance, PopulationSpectrum, ensemble_from_dict,
                    load_scenario, make_member, toeplitz_covariance)
from .spectral import OmegaContext, build_contour, solve_mu0, solve_omega, support_interval

__all__ = [
    "ConvergenceError", "DescriptorSet", "DistanceKind", "DomainError", "Ensemble", "GaussianLaw",
    "GeometryError", "NumericError", "OmegaContext", "PoleError", "PopulationCovariance",
    "PopulationSpectrum", "ScmAsymError", "SingularityError", "build_contour", "cross_covariance",
    "deterministic_equivalent", "ensemble_from_dict", "gaussian_law", "load_scenario", "make_member",
    "pair_from_ensemble", "second_order_mean", "solve_mu0", "solve_omega", "support_interval",
    "toeplitz_covariance", "variance",
]
__version__ = "0.1.0"
