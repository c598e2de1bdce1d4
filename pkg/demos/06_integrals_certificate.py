"""Determinant integrals and the integrated W^{2,2} bound.

int det W_u is the surface area of the body, int u det W_u / 3 its volume and
the polarization of the area gives the mixed integral.  For u = u1 - u2 under
the curvature condition, |W_u|^2 is bounded by a multiple of -det W_u, which
integrates to a bound on int |W_u|^2.
"""

import numpy as np

from convexuniq.bodies import make_preset
from convexuniq.integrals import (area_integral, determinant_comparison, integral_report,
                                  mixed_discriminant_integral, volume, w22_certificate)
from convexuniq.sphere import build_grid

grid = build_grid(32)
ball = make_preset("ball", [1.0], grid)
ell = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid)
print(f"ball: area/4pi {area_integral(ball) / (4 * np.pi):.14f}, volume/(4pi/3) {volume(ball) / (4 * np.pi / 3):.14f}")
print(f"ellipsoid volume / (4pi abc/3) = {volume(ell) / (4 * np.pi * 1.2 * 0.9 / 3):.10f}")
m = mixed_discriminant_integral(ball, ell)
print(f"mixed integral {m:.6f}; Minkowski inequality m^2 >= A1 A2: "
      f"{m**2:.4f} >= {area_integral(ball) * area_integral(ell):.4f}")
print(integral_report(ball, ell).as_dict())

cert = w22_certificate(ell, ell.translated([0.2, 0.0, 0.1]), "mean")
print(f"translated pair: passed {cert.passed}, int |W_u|^2 {cert.int_W_sq:.1e} <= {cert.integral_bound_rhs:.2f}")

pert = make_preset("harmonic_perturbed_ball", [1.0, 3, 1, 0.03], grid)
cert = w22_certificate(ell, pert, "mean", require_condition=False)
print(f"unrelated pair (condition residual {cert.condition_residual:.2f}): "
      f"comparison margin {cert.margin2:.3f}, literal margin {cert.margin2_literal:.3f}")

rng = np.random.default_rng(0)
A, B = rng.standard_normal((2, 10000, 2, 2))
val = determinant_comparison(A @ A.transpose(0, 2, 1), B @ B.transpose(0, 2, 1))
print(f"det(W1+W2) + det(W1-W2) over 10000 random PSD pairs: min {val.min():.2e}")
