import numpy as np
import pytest

from convexuniq.bodies import make_preset, spherical_hessian
from convexuniq.elliptic import (ThresholdPolicy, assemble_global, calibrate_threshold, formulation_equivalence,
                                 homogeneous_extension, kernel_analysis, mollify_coefficients, radial_null_check)
from convexuniq.errors import DomainError
from convexuniq.functionals import CoefficientField, coefficient_preset, constant_coefficients
from convexuniq.sphere import ScalarField, SymMatrixField, random_bandlimited


def test_identity_operator_is_laplacian_plus_two(grid16):
    op = assemble_global(constant_coefficients(grid16))
    for l in range(5):
        Y = ScalarField(grid16, grid16.real_harmonic(l, 0))
        np.testing.assert_allclose(op.apply(Y).values, (2 - l * (l + 1)) * Y.values, atol=1e-10)


def test_matrix_and_direct_application_agree(grid16, rng):
    F = coefficient_preset("twisted", grid16)
    op = assemble_global(F)
    a = np.zeros(grid16.ncoef)
    a[:100] = rng.standard_normal(100)
    u = ScalarField.from_coeffs(grid16, grid16.from_real(a))
    np.testing.assert_allclose(op.apply_coeffs(a), op.apply(u).values, atol=1e-10)


def test_linear_harmonics_in_kernel(grid16):
    for name in ("conformal", "ambient", "twisted", "secant_mean"):
        op = assemble_global(coefficient_preset(name, grid16))
        for k in range(3):
            assert np.max(np.abs(op.apply(ScalarField(grid16, grid16.nodes[:, k])).values)) < 1e-10


def test_scaling_of_singular_values(grid16):
    F = constant_coefficients(grid16)
    s1 = kernel_analysis(assemble_global(F)).singular_values
    s3 = kernel_analysis(assemble_global(F.scaled(3.0))).singular_values
    np.testing.assert_allclose(s3[3:], 3 * s1[3:], rtol=1e-10)


def test_kernel_report_fields(grid16):
    rep = kernel_analysis(assemble_global(coefficient_preset("twisted", grid16)))
    assert rep.kernel_dim == 3 and len(rep.basis) == 3
    for b in rep.basis:
        assert np.isclose(grid16.integrate(b.values**2), 1.0)
    assert rep.kernel_dim == int(np.sum(rep.singular_values < rep.threshold))
    assert rep.policy["kind"] == "h2" and set(rep.as_dict()) >= {"singular_values", "kernel_dim", "threshold"}


def test_relative_policy(grid16):
    rep = kernel_analysis(assemble_global(constant_coefficients(grid16)), ThresholdPolicy("relative", 1e-8))
    assert rep.kernel_dim == 3


def test_calibration_constant_exceeds_frozen_value():
    from convexuniq.elliptic import DEFAULT_THRESHOLD_C

    assert calibrate_threshold(16) > DEFAULT_THRESHOLD_C


def test_non_elliptic_rejected(grid16):
    F = CoefficientField(SymMatrixField.from_matrices(grid16, np.diag([1.0, -1.0])))
    with pytest.raises(DomainError):
        assemble_global(F)


def test_mollify_identity_unchanged(grid16):
    F = mollify_coefficients(constant_coefficients(grid16), 0.2)
    np.testing.assert_allclose(F.field.matrices(), np.eye(2)[None].repeat(grid16.size, 0), atol=1e-12)
    assert F.provenance["mollified"]["distance"] < 1e-12


def test_mollify_distance_vanishes(grid24):
    F = coefficient_preset("twisted", grid24)
    d = [mollify_coefficients(F, eps).provenance["mollified"]["distance"] for eps in (0.3, 0.1, 0.03, 0.01)]
    assert all(a > b for a, b in zip(d, d[1:])) and d[-1] < 1e-3


def test_mollify_step_plateau(grid24):
    # F = (1 + H(x3)) I: the distance stays near half the jump as eps shrinks
    def step(points):
        pts = np.atleast_2d(points)
        P = np.eye(3)[None] - np.einsum("na,nb->nab", pts, pts)
        return (1.0 + (pts[:, 2] > 0))[:, None, None] * P

    s = 1.0 + (grid24.nodes[:, 2] > 0)
    F = CoefficientField(SymMatrixField.from_matrices(grid24, s[:, None, None] * np.eye(2)), {}, step)
    d = [mollify_coefficients(F, eps).provenance["mollified"]["distance"] for eps in (0.1, 0.03, 0.01)]
    assert all(0.4 < v < 0.6 for v in d) and abs(d[-1] - d[-2]) < 0.02
    with pytest.raises(DomainError):
        mollify_coefficients(F, 0.0)


def test_mollified_sampler_matches_nodes(grid24):
    Fm = mollify_coefficients(coefficient_preset("twisted", grid24), 0.1)
    e1, e2 = grid24.frame()
    T = Fm.sampler(grid24.nodes)
    E = np.stack([e1, e2], axis=1)
    local = np.einsum("nia,nab,njb->nij", E, T, E)
    np.testing.assert_allclose(local, Fm.field.matrices(), atol=1e-10)


def test_homogeneous_extension(grid16, rng):
    v = homogeneous_extension(ScalarField(grid16, grid16.nodes[:, 2]))
    X = rng.standard_normal((20, 3))
    np.testing.assert_allclose(v(X), X[:, 2], atol=1e-12)
    one = homogeneous_extension(ScalarField.constant(grid16, 1.0))
    np.testing.assert_allclose(one(X), np.linalg.norm(X, axis=1), atol=1e-12)
    u = random_bandlimited(grid16, 6, rng)
    w = homogeneous_extension(u)
    np.testing.assert_allclose(w(2 * X), 2 * w(X), rtol=1e-12)
    with pytest.raises(DomainError):
        w(np.zeros((1, 3)))


def test_radial_null_ball(grid16, rng):
    rep = radial_null_check(make_preset("ball", [1.7], grid16), rng.standard_normal((10, 3)))
    assert rep["pass"]
    unit = rng.standard_normal((10, 3))
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    from convexuniq.elliptic import fd_hessian

    H = fd_hessian(homogeneous_extension(make_preset("ball", [1.7], grid16).u), unit)
    ev = np.linalg.eigvalsh(H)
    np.testing.assert_allclose(ev[:, 1:], 1.7, atol=1e-5)


def test_formulation_equivalence(grid24):
    body = make_preset("ellipsoid", [1.2, 1.0, 0.85], grid24)
    A = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]])
    pts = np.random.default_rng(1).standard_normal((30, 3))
    rep = formulation_equivalence(body, lambda x: np.broadcast_to(A, (len(x), 3, 3)), pts)
    assert rep["max_difference"] < 1e-5
