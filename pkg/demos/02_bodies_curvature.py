"""Bodies, principal radii and the curvature condition.

A support function determines the boundary through the gradient map; the
eigenvalues of W_u are the principal radii.  Two bodies satisfy the curvature
condition for f when f(1/r1, 1/r2) agrees at every normal.
"""

import numpy as np

from convexuniq.bodies import check_convexity, gradient_map, make_preset, minkowski_sum, spherical_hessian
from convexuniq.functionals import check_condition, principal_radii
from convexuniq.sphere import build_grid

grid = build_grid(24)
ell = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid)
X = gradient_map(ell).points
print("ellipsoid boundary: max |X^2/a^2 + ...| - 1 =",
      f"{np.max(np.abs(np.sum(X**2 / np.array([1.44, 1.0, 0.81]), axis=1) - 1)):.1e}")
r1, r2 = principal_radii(spherical_hessian(ell))
print(f"principal radii range [{r1.min():.4f}, {r2.max():.4f}]")
print("convexity:", check_convexity(ell)["pass"])

shifted = ell.translated([0.3, -0.1, 0.2])
for f in ("mean", "gauss", "weighted:1,2"):
    print(f"{f:>14}: translate residual {check_condition(f, ell, shifted).max_abs:.1e}, "
          f"ball residual {check_condition(f, ell, make_preset('ball', [1.0], grid)).max_abs:.2f}")

s = minkowski_sum(ell, make_preset("ball", [0.5], grid))
print("Minkowski sum with ball(0.5) adds 0.5 to both radii:",
      np.allclose(principal_radii(spherical_hessian(s))[0], r1 + 0.5, atol=1e-8))
