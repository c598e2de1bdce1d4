import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexuniq.errors import GridError
from convexuniq.sphere import (MAX_L, ScalarField, SymMatrixField, build_grid, covariant_gradient,
                               covariant_hessian, covariant_third, derivatives, derivatives_at, integrate,
                               laplace_beltrami, random_bandlimited)


def test_weights_sum_to_sphere_area(grid16):
    assert np.isclose(grid16.weights.sum(), 4 * np.pi, rtol=1e-14)


def test_bad_resolution():
    for L in (1, 0, MAX_L + 1, 2.5):
        with pytest.raises(GridError):
            build_grid(L)
    with pytest.raises(GridError):
        build_grid(8, nlat=5)


def test_grid_mismatch(grid16, grid24):
    with pytest.raises(GridError):
        grid16.check_same(grid24)
    with pytest.raises(GridError):
        ScalarField.constant(grid16, 1.0) + ScalarField.constant(grid24, 1.0)


def test_round_trip(grid16, rng):
    u = random_bandlimited(grid16, 16, rng)
    back = ScalarField(grid16, u.values)
    np.testing.assert_allclose(back.coeffs, u.coeffs, atol=1e-12)
    assert back.alias_error < 1e-12


def test_real_harmonics_orthonormal(grid16):
    Y = np.stack([grid16.real_harmonic(l, m) for l in range(4) for m in range(-l, l + 1)])
    G = (Y * grid16.weights) @ Y.T
    np.testing.assert_allclose(G, np.eye(len(Y)), atol=1e-12)


def test_exact_degree_quadrature(grid16):
    # x3^(2k) integrates to 4 pi / (2k + 1)
    for k in range(8):
        assert np.isclose(grid16.integrate(grid16.nodes[:, 2] ** (2 * k)), 4 * np.pi / (2 * k + 1), rtol=1e-13)


def test_laplace_beltrami_spectrum(grid16):
    for l in range(5):
        Y = ScalarField(grid16, grid16.real_harmonic(l, min(l, 1)))
        np.testing.assert_allclose(laplace_beltrami(Y).values, -l * (l + 1) * Y.values, atol=1e-11)


def test_hessian_of_linear_function(grid16):
    # (x3)_ij = -x3 delta_ij
    u = ScalarField.linear(grid16, [0.0, 0.0, 1.0])
    H = covariant_hessian(u)
    x3 = grid16.nodes[:, 2]
    np.testing.assert_allclose(H.m11, -x3, atol=1e-11)
    np.testing.assert_allclose(H.m12, 0.0, atol=1e-11)
    np.testing.assert_allclose(H.m22, -x3, atol=1e-11)


def test_trace_of_hessian_is_laplacian(grid16, rng):
    u = random_bandlimited(grid16, 12, rng)
    np.testing.assert_allclose(covariant_hessian(u).trace(), laplace_beltrami(u).values, atol=1e-9)


def test_gradient_of_linear(grid16, rng):
    a = rng.standard_normal(3)
    g = covariant_gradient(ScalarField.linear(grid16, a)).cartesian()
    x = grid16.nodes
    np.testing.assert_allclose(g, a - (x @ a)[:, None] * x, atol=1e-12)


def _geodesic_fd(u, x, e, h=1e-4):
    # second derivative along the great circle through x with direction e
    pts = np.stack([np.cos(t) * x + np.sin(t) * e for t in (-h, 0.0, h)])
    f = u.evaluate(pts)
    return (f[0] - 2 * f[1] + f[2]) / h**2


def test_hessian_matches_geodesic_differences(grid16, rng):
    u = random_bandlimited(grid16, 8, rng)
    H = covariant_hessian(u).matrices()
    e1, e2 = grid16.frame()
    for k in rng.choice(grid16.size, 10, replace=False):
        for w in ([1.0, 0.0], [0.0, 1.0], [0.6, 0.8]):
            e = w[0] * e1[k] + w[1] * e2[k]
            assert np.isclose(_geodesic_fd(u, grid16.nodes[k], e), np.dot(w, H[k] @ w), atol=2e-5)


def test_codazzi_symmetry(grid16, rng):
    # W_ijk = u_ij;k + u_k delta_ij is symmetric in all indices
    u = random_bandlimited(grid16, 10, rng)
    W3 = covariant_third(u).copy()
    g = covariant_gradient(u).comps
    W3[:, 0, 0, :] += g
    W3[:, 1, 1, :] += g
    np.testing.assert_allclose(W3, np.transpose(W3, (0, 1, 3, 2)), atol=1e-9)
    np.testing.assert_allclose(W3, np.transpose(W3, (0, 3, 2, 1)), atol=1e-9)


def test_frame_invariance(grid16, rng):
    u = random_bandlimited(grid16, 10, rng)
    a = covariant_hessian(u, "thetaphi").eigvalsh()
    b = covariant_hessian(u, "tilted").eigvalsh()
    np.testing.assert_allclose(a, b, atol=1e-10)
    g1 = covariant_gradient(u, "thetaphi").cartesian()
    g2 = covariant_gradient(u, "tilted").cartesian()
    np.testing.assert_allclose(g1, g2, atol=1e-11)


def test_symmatrix_frame_change(grid16, rng):
    M = rng.standard_normal((grid16.size, 2, 2))
    S = SymMatrixField.from_matrices(grid16, M + np.transpose(M, (0, 2, 1)))
    T = S.in_frame("tilted")
    np.testing.assert_allclose(T.cartesian(), S.cartesian(), atol=1e-12)
    np.testing.assert_allclose(T.eigvalsh(), S.eigvalsh(), atol=1e-12)


def test_derivatives_at_points_match_nodes(grid16, rng):
    u = random_bandlimited(grid16, 10, rng)
    idx = rng.choice(grid16.size, 7, replace=False)
    g, h, t, _ = derivatives_at(u, grid16.nodes[idx], 3)
    G, H, T = derivatives(u, 3)
    np.testing.assert_allclose(g, G[idx], atol=1e-10)
    np.testing.assert_allclose(h, H[idx], atol=1e-9)
    np.testing.assert_allclose(t, T[idx], atol=1e-8)


def test_evaluate_at_pole_rejects_derivatives(grid16):
    with pytest.raises(GridError):
        grid16.evaluate(ScalarField.constant(grid16, 1.0).coeffs, np.array([[0.0, 0.0, 1.0]]), 1, 0)


def test_integrate(grid16):
    assert np.isclose(integrate(ScalarField.constant(grid16, 2.0)), 8 * np.pi)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_of_derivatives(seed, alpha, beta):
    grid = build_grid(12)
    rng = np.random.default_rng(seed)
    u, v = random_bandlimited(grid, 8, rng), random_bandlimited(grid, 8, rng)
    lhs = covariant_hessian(u * alpha + v * beta).entries
    rhs = alpha * covariant_hessian(u).entries + beta * covariant_hessian(v).entries
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(alpha) + abs(beta)))
