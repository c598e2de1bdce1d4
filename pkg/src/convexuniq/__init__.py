"""Numerical laboratory for uniqueness of convex bodies with prescribed curvature functionals.

Support functions live on a Gauss-Legendre sphere grid with spectral
derivatives (:mod:`convexuniq.sphere`); bodies, curvature functionals, the
linearized operator and its kernel, the maximum-principle diagnostics and the
determinant integrals build on top of it.
"""

from .bodies import (SupportBody, check_convexity, gradient_map, gradient_map_derivative, make_preset,
                     minkowski_sum, spherical_hessian, weingarten_image)
from .cap import CapProblem, CapSolution, solve_cap_dirichlet
from .elliptic import (AssembledOperator, KernelReport, ThresholdPolicy, assemble_global, homogeneous_extension,
                       kernel_analysis, mollify_coefficients, radial_null_check, substitution_identity)
from .errors import ConvexityError, ConvexUniqError, DomainError, GridError, HypothesisViolated, SolverError
from .functionals import (CoefficientField, CurvatureFunctional, check_condition, coefficient_field_secant,
                          coefficient_preset, ellipticity_constants, evaluate_functional, functional_derivative,
                          get_functional, lemma_det_check, null_solution_sample, principal_curvatures,
                          principal_radii)
from .integrals import area_integral, mixed_discriminant_integral, volume, w22_certificate
from .maxprin import (identity_check_phi, identity_check_rho, lower_bound_check, max_set, phi_field, rho_field,
                      rho_max, translation_witness)
from .pipeline import RunConfig, UniquenessVerdict, cmd_uniqueness, uniqueness
from .sphere import (ScalarField, SphereGrid, SymMatrixField, TangentVectorField, build_grid, covariant_gradient,
                     covariant_hessian, covariant_third, derivatives, integrate, laplace_beltrami, random_bandlimited)

__version__ = "0.1.0"
