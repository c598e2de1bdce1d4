"""Maximum-principle witness for translations.

rho_u = |grad u|^2 + u^2 is the squared length of the gradient map of
u = u1 - u2.  At its maximum the gradient map points along a fixed E, and
u - sqrt(rho_max) <E, x> vanishes on the max set of phi_E.  When the two
bodies differ by a translation this recovers the translation vector.
"""

import numpy as np

from convexuniq.bodies import make_preset
from convexuniq.errors import HypothesisViolated
from convexuniq.functionals import coefficient_preset
from convexuniq.maxprin import identity_check_rho, max_set, phi_field, rho_field, translation_witness
from convexuniq.sphere import build_grid, random_bandlimited

grid = build_grid(24)
u = random_bandlimited(grid, 8, np.random.default_rng(2))
u = u * (1.0 / np.sqrt(grid.integrate(u.values**2)))
rep = identity_check_rho(u, coefficient_preset("twisted", grid))
print(f"rho identity for a random u: residual {rep['max_residual']:.1e}")

b1 = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid)
a = np.array([0.15, -0.25, 0.1])
w = translation_witness(b1, b1.translated(a), "mean")
print(f"verdict {w.verdict}; recovered a = {np.round(w.translation, 12)}; true a = {a}")
print(f"rho_max {w.rho_max:.6f} = |a|^2 {a @ a:.6f}; E = {np.round(w.E, 6)}")

# for an exact translation X_u is the constant -a, so phi_E and rho are constant
d = b1.u - b1.translated(a).u
ms = max_set(phi_field(d, w.E))
print(f"max set of phi_E: {len(ms.nodes)} nodes, {ms.n_components} component(s), isolated {ms.isolated}")
print(f"max set of rho: {len(max_set(rho_field(d)).nodes)} node(s)")

try:
    translation_witness(b1, make_preset("ball", [1.0], grid), "mean")
except HypothesisViolated as exc:
    print("ellipsoid vs ball:", exc)
