"""Kernel of the linearized operator.

For two bodies with equal curvature functional, u = u1 - u2 solves a linear
elliptic equation whose coefficients come from a secant integral.  On the
sphere the kernel of that operator is spanned by linear functions, which
is what translations look like.
"""

import numpy as np

from convexuniq.bodies import make_preset, spherical_hessian
from convexuniq.elliptic import ThresholdPolicy, assemble_global, calibrate_threshold, kernel_analysis
from convexuniq.functionals import coefficient_field_secant, constant_coefficients, get_functional
from convexuniq.sphere import build_grid

for L in (12, 16, 24):
    grid = build_grid(L)
    rep = kernel_analysis(assemble_global(constant_coefficients(grid)))
    print(f"F = I, L={L}: smallest singular values {np.array2string(rep.singular_values[:5], precision=2)}")
    print(f"   kernel dim {rep.kernel_dim}, threshold {rep.threshold:.1e}, projection residual "
          f"{rep.projection_residual:.1e}")

grid = build_grid(24)
W1 = spherical_hessian(make_preset("ball", [1.0], grid))
W2 = spherical_hessian(make_preset("ellipsoid", [1.1, 1.0, 0.95], grid))
F = coefficient_field_secant(get_functional("mean"), W1, W2)
rep = kernel_analysis(assemble_global(F), ThresholdPolicy("h2"))
print(f"secant coefficients (ball vs ellipsoid): kernel dim {rep.kernel_dim}, "
      f"projection residual {rep.projection_residual:.1e}, gap ratio {rep.gap_ratio:.1e}")
print(f"threshold constant calibrated at L=16: {calibrate_threshold(16):.2e}")
