"""Bayesian estimation of the separation of two incoherent point sources."""
from .fock import FockOperator, FockVector, SqueezeParams, coherent_vector, rho_two_source, squeeze_matrix
from .priors import (
    DisplacedHalfGaussianPrior,
    FullGaussianPrior,
    HalfGaussianPrior,
    Moments,
    UnreachableMoments,
    invert_moments,
)
from .personick import (
    GammaTriple,
    PersonickSolution,
    auto_cutoff,
    build_gamma_numeric,
    mmse_halfgaussian_analytic,
    solve_B,
)

__version__ = "0.1.0"
