"""Coupled spherical mixed even p-spin glasses with constrained overlaps.

The package evaluates and minimizes the variational (Parisi-type) functional
whose double infimum over a positive-definite multiplier and a discrete
monotone matrix path gives the limiting constrained free energy, and it ships
independent Monte Carlo oracles for every closed form the functional uses:

- ``mixture``    covariance kernels xi, xi', theta and path increment matrices
- ``geometry``   constraint matrices, discrete monotone PSD paths, path metric
- ``functional`` multiplier chain, admissible set, functional evaluation
- ``optimizer``  inner Newton solve over the multiplier, outer path search,
                 degeneracy dichotomy
- ``cascade``    nested Monte Carlo recursion oracle and finite weight cascades
- ``montecarlo`` desk-scale direct free-energy estimator on constrained spheres
- ``cli``        config-driven subcommands with reproducible JSON/CSV reports
"""

from sphglass.mixture import MixtureSpec, xi_matrix, xi_prime_matrix, theta_matrix, delta_increments
from sphglass.geometry import ConstraintMatrix, DiscretePath, validate_path, path_distance, refine_path
from sphglass.functional import (
    FunctionalBreakdown,
    LambdaChain,
    NotInL,
    InvalidPath,
    lambda_chain,
    evaluate,
    theta_term,
    closed_form_Y0,
    jacobi_limit_term,
    gaussian_quadratic_identity,
)
from sphglass.optimizer import (
    PathSearchConfig,
    InnerSolveReport,
    OptimizationReport,
    inner_gradient,
    inner_minimize,
    detect_degenerate,
    minimize_over_paths,
)

__version__ = "0.1.0"
