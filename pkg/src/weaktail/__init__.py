"""Weak tail dependence functions of copulas and log-scale tail asymptotics."""

__version__ = "0.1.0"

from .errors import (
    AccuracyUnreachable,
    ConvergenceError,
    DimensionTooLarge,
    DomainError,
    InsufficientData,
    NoConvergence,
    NonPositiveDefinite,
    NotIdenticalLegs,
    SequenceNotConverging,
    ValidationError,
    WeakTailError,
    ZeroLambda,
)
from .simplex import (
    MixtureParams,
    SimplexSolution,
    brute_force_simplex_min,
    c_star_theta,
    min_quadratic_on_simplex,
    mixture_polytope_min,
)
from .gausstail import gaussian_tail_cdf, log_gaussian_tail_cdf
from .copula import (
    Archimedean,
    ArchimedeanGenerator,
    Comonotone,
    Gaussian,
    GaussianMixtureSym,
    GumbelEV,
    Independence,
    bivariate_corr,
    copula_cdf,
    generator_phi,
    generator_phi_inv,
    log_copula_cdf,
    log_survival_copula_cdf,
    spec_from_dict,
    spec_to_dict,
    survival_copula_cdf,
)
from .chi import (
    ChiResult,
    chi_archimedean,
    chi_closed_form,
    chi_empirical,
    chi_extreme_value,
    chi_gaussian,
    chi_gaussian_mixture,
    chi_independence,
    chi_upper_empirical,
    lambda_L,
)
from .samplers import MarginSpec, copula_sampler, exponential_margin, uniform_margin, with_margins
from .asymptotics import (
    FunctionalRegion,
    SlopeFit,
    TailCurve,
    fit_log_slope,
    mc_tail_curve,
    predicted_inverse_chi,
    region_indicator,
    theorem_check,
)
from .portfolio import (
    HrvQuantities,
    PortfolioSpec,
    bs_call_price,
    hrv_quantities,
    hrv_sharp_asymptote,
    portfolio_sigma_matrix,
    portfolio_tail_curve,
    predicted_portfolio_slope,
    price_tail_equivalent,
)
