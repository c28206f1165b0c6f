"""Radial p-Laplace laboratory on warped-product model geometries.

Solves -div(|grad u|^(p-2) grad u) = lambda h(u) on the unit geodesic ball of
a rotationally symmetric model, follows minimal-solution branches up to the
extremal parameter, and audits the stability forms, weighted gradient bounds
and regularity exponents of the radial semi-stable class.
"""

from .branch import (Branch, BranchPoint, Divergence, LambdaBracket,
                     SolverSettings, continue_branch, default_lambda_samples,
                     estimate_lambda_star, extremal_approximation,
                     lambda_lower_bound, monotone_minimal_solution)
from .config import RunConfig, parse_config
from .errors import (AlphaRangeError, AssemblyError, BranchError, ConfigError,
                     DomainError, EigenConvergenceError, ExpressionError,
                     MinimalityError, NewtonDivergenceError, PballError,
                     ProfileError, SaturationError, SingularPointError,
                     SupportError, UnboundedLambdaStarError)
from .expressions import compile_expression
from .geometry import (RiemannianModel, WarpingProfile, admissible_delta,
                       psi_eval, sectional_curvature, stability_potential,
                       volume_weight)
from .nonlinearity import Nonlinearity, is_superlinear
from .operators import (OperatorConfig, RadialGrid, SolutionProfile,
                        assemble_jacobian, assemble_residual, build_weights,
                        linf_norm, lq_norm, solve_fixed_rhs, torsion_function,
                        w1q_norm, w1q_seminorm, weighted_integral)
from .stability import (ExponentReport, StabilityReport,
                        WeightedEstimateReport, alpha_max,
                        cutoff_test_function, hardy_audit, hardy_form,
                        norm_audit, principal_eigenvalue,
                        regularity_exponents, regularity_threshold,
                        stability_along_branch, stability_form,
                        weighted_gradient_estimate)

__version__ = "0.1.0"
