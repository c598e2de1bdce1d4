import numpy as np
import pytest

from convexuniq.bodies import (check_convexity, ellipsoid_hessian_exact, gradient_map, gradient_map_derivative,
                               make_preset, minkowski_sum, spherical_hessian, weingarten_image)
from convexuniq.errors import ConvexityError, DomainError
from convexuniq.sphere import build_grid


def test_ball_hessian(grid16):
    b = make_preset("ball", [2.0, 0.3, -0.1, 0.2], grid16)
    W = spherical_hessian(b)
    np.testing.assert_allclose(W.m11, 2.0, atol=1e-11)
    np.testing.assert_allclose(W.m12, 0.0, atol=1e-11)
    np.testing.assert_allclose(W.m22, 2.0, atol=1e-11)


def test_ball_boundary_points(grid16):
    X = gradient_map(make_preset("ball", [1.5, 0.2, 0.0, -0.1], grid16)).points
    np.testing.assert_allclose(np.linalg.norm(X - [0.2, 0.0, -0.1], axis=1), 1.5, atol=1e-12)


@pytest.mark.parametrize("L, tol", [(24, 1e-4), (48, 1e-8)])
def test_ellipsoid_hessian_against_closed_form(L, tol):
    grid = build_grid(L)
    axes = [2.0, 1.0, 1.0]
    W = spherical_hessian(make_preset("ellipsoid", axes, grid))
    exact = ellipsoid_hessian_exact(axes, grid.nodes)
    assert np.max(np.abs(W.cartesian() - exact)) < tol


def test_ellipsoid_gauss_curvature_at_pole():
    # det W = a^2 b^2 c^2 / h^4, at the north pole a^2 b^2 / c^2
    grid = build_grid(32)
    a, b, c = 1.2, 1.0, 0.9
    pole = np.array([[0.0, 0.0, 1.0]])
    W = ellipsoid_hessian_exact([a, b, c], pole)[0]
    ev = np.linalg.eigvalsh(W)[1:]
    assert np.isclose(np.prod(ev), a**2 * b**2 / c**2)
    body = make_preset("ellipsoid", [a, b, c], grid)
    k = np.argmax(grid.nodes[:, 2])
    h = np.sqrt(grid.nodes[k] ** 2 @ np.array([a, b, c]) ** 2)
    assert np.isclose(spherical_hessian(body).det()[k], (a * b * c) ** 2 / h**4, rtol=1e-9)


def test_harmonic_perturbation(grid16):
    b = make_preset("harmonic_perturbed_ball", [1.0, 2, 1, 0.05], grid16)
    np.testing.assert_allclose(b.u.values, 1.0 + 0.05 * grid16.real_harmonic(2, 1))
    with pytest.raises(ConvexityError):
        make_preset("harmonic_perturbed_ball", [1.0, 3, 0, 2.0], grid16)


@pytest.mark.parametrize("kind, params", [("ball", [-1.0]), ("ellipsoid", [1.0, 0.0, 1.0]),
                                          ("ellipsoid", [1.0, 1.0]), ("cube", [1.0]), ("ball", [1.0, 2.0])])
def test_bad_presets(grid16, kind, params):
    with pytest.raises(DomainError):
        make_preset(kind, params, grid16)


def test_minkowski_sum_of_balls(grid16):
    s = minkowski_sum(make_preset("ball", [1.0], grid16), make_preset("ball", [2.0, 0.1, 0.0, 0.0], grid16))
    np.testing.assert_allclose(spherical_hessian(s).eigvalsh(), 3.0, atol=1e-10)


def test_convexity_report(grid16):
    rep = check_convexity(make_preset("ellipsoid", [1.2, 1.0, 0.8], grid16))
    assert rep["pass"] and rep["min_eig"] > 0 and rep["grid_L"] == 16
    flat = make_preset("ball", [1.0], grid16).u * 0.0
    assert not check_convexity(flat)["pass"]


def test_translation_and_scaling(grid16):
    b = make_preset("ellipsoid", [1.2, 1.0, 0.8], grid16)
    t = b.translated([0.1, 0.2, 0.3])
    np.testing.assert_allclose(spherical_hessian(t).entries, spherical_hessian(b).entries, atol=1e-10)
    np.testing.assert_allclose(spherical_hessian(b.scaled(2.0)).entries, 2 * spherical_hessian(b).entries,
                               atol=1e-10)
    with pytest.raises(DomainError):
        b.scaled(-1.0)


def test_derivative_law_on_ellipsoid(grid24):
    # the ellipsoid is not band-limited: the two sides differ by truncation error
    b = make_preset("ellipsoid", [1.2, 1.0, 0.8], grid24)
    assert np.max(np.abs(gradient_map_derivative(b) - weingarten_image(b))) < 1e-6
