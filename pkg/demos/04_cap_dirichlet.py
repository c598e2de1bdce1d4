"""Dirichlet problem on a geodesic cap.

The substitution u = x3 v removes the zeroth-order term, so the reduced
equation for v has a maximum principle and is uniquely solvable on caps
inside a hemisphere.  Rough coefficients are mollified first.
"""

import numpy as np

from convexuniq.cap import CapProblem, solve_cap_dirichlet
from convexuniq.elliptic import mollify_coefficients, substitution_identity
from convexuniq.functionals import coefficient_preset
from convexuniq.sphere import build_grid, random_bandlimited

grid = build_grid(24)
F = coefficient_preset("identity", grid)
R = 0.8
sol = solve_cap_dirichlet(CapProblem([0, 0, 1], R, lambda x: np.ones(len(x)), F))
pts = grid.nodes[grid.nodes[:, 2] > np.cos(R)]
print(f"F = I, data 1: solution is x3 / cos R to {np.max(np.abs(sol.evaluate(pts) - pts[:, 2] / np.cos(R))):.1e}")
print(f"   PDE residual {sol.report['pde_residual_max']:.1e}, condition {sol.report['condition_estimate']:.1e}")

v = random_bandlimited(grid, 6, np.random.default_rng(1))
Ft = coefficient_preset("twisted", grid)
print(f"substitution identity residual: {substitution_identity(v, Ft)['max_residual']:.1e}")

g = lambda x: 1.0 + 0.5 * x[:, 0] * x[:, 1]
center = np.array([0.3, 0.0, 0.95]) / np.linalg.norm([0.3, 0.0, 0.95])
inner = grid.nodes[grid.nodes @ center > np.cos(0.8)]
prev = None
for eps in (0.2, 0.1, 0.05, 0.025):
    Fm = mollify_coefficients(Ft, eps)
    vals = solve_cap_dirichlet(CapProblem(center, 1.0, g, Fm)).evaluate(inner)
    msg = "" if prev is None else f", change {np.max(np.abs(vals - prev)):.1e}"
    print(f"eps={eps:<6} distance to F {Fm.provenance['mollified']['distance']:.1e}{msg}")
    prev = vals
