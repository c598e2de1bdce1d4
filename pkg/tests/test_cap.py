import numpy as np
import pytest

from convexuniq.cap import CapProblem, cheb, fourier_matrices, solve_cap_dirichlet
from convexuniq.elliptic import mollify_coefficients
from convexuniq.errors import DomainError
from convexuniq.functionals import coefficient_preset


def test_cheb_differentiates_polynomials():
    x, D = cheb(12)
    np.testing.assert_allclose(D @ x**5, 5 * x**4, atol=1e-11)


def test_fourier_matrices():
    D1, D2 = fourier_matrices(16)
    phi = 2 * np.pi * np.arange(16) / 16
    np.testing.assert_allclose(D1 @ np.sin(3 * phi), 3 * np.cos(3 * phi), atol=1e-12)
    np.testing.assert_allclose(D2 @ np.cos(2 * phi), -4 * np.cos(2 * phi), atol=1e-11)
    with pytest.raises(DomainError):
        fourier_matrices(15)


def test_cap_must_stay_in_hemisphere(grid16):
    F = coefficient_preset("identity", grid16)
    with pytest.raises(DomainError):
        CapProblem([0, 0, 1], np.pi / 2, lambda x: x[:, 0], F)
    with pytest.raises(DomainError):
        CapProblem([0, 0, 0], 0.5, lambda x: x[:, 0], F)


def test_radial_solution_identity(grid16):
    # F = I, data 1: the regular radial solution of u'' + cot(r) u' + 2u = 0 is cos(r)
    F = coefficient_preset("identity", grid16)
    R = 0.8
    sol = solve_cap_dirichlet(CapProblem([0, 0, 1], R, lambda x: np.ones(len(x)), F))
    pts = grid16.nodes[grid16.nodes[:, 2] > np.cos(R)]
    np.testing.assert_allclose(sol.evaluate(pts), pts[:, 2] / np.cos(R), atol=1e-10)
    assert sol.report["pde_residual_max"] < 1e-8
    # the solution is not the constant ball support function
    assert np.max(np.abs(sol.evaluate(pts) - 1.0)) > 0.05


def test_linear_data_reproduced_off_center(grid24, rng):
    F = coefficient_preset("ambient", grid24)
    a = rng.standard_normal(3)
    c = np.array([0.5, -0.3, -0.6])
    sol = solve_cap_dirichlet(CapProblem(c, 1.2, lambda x: x @ a, F))
    mask, vals = sol.on_grid(grid24)
    assert mask.sum() > 10
    np.testing.assert_allclose(vals, grid24.nodes[mask] @ a, atol=1e-9)


def test_mollified_solutions_converge(grid24):
    F = coefficient_preset("twisted", grid24)
    g = lambda x: 1.0 + 0.5 * x[:, 0] * x[:, 1]
    pts = grid24.nodes[grid24.nodes[:, 2] > np.cos(0.6)]
    sols = [solve_cap_dirichlet(CapProblem([0, 0, 1], 0.8, g, mollify_coefficients(F, eps))).evaluate(pts)
            for eps in (0.2, 0.1, 0.05, 0.025)]
    diffs = [np.max(np.abs(a - b)) for a, b in zip(sols, sols[1:])]
    assert all(x > y for x, y in zip(diffs, diffs[1:]))


def test_outside_cap_rejected(grid16):
    F = coefficient_preset("identity", grid16)
    sol = solve_cap_dirichlet(CapProblem([0, 0, 1], 0.5, lambda x: x[:, 2], F, nr=8, nphi=16))
    with pytest.raises(DomainError):
        sol.evaluate(np.array([[1.0, 0.0, 0.0]]))
