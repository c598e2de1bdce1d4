import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexuniq.bodies import make_preset, minkowski_sum
from convexuniq.errors import HypothesisViolated
from convexuniq.integrals import (area_integral, determinant_comparison, integral_report,
                                  mixed_discriminant_integral, pointwise_margins, volume, w22_certificate)
from convexuniq.sphere import build_grid

GRID = build_grid(16)


def test_ball_mixed_integral(grid16):
    b1 = make_preset("ball", [1.5], grid16)
    b2 = make_preset("ball", [0.7, 0.2, 0.0, 0.1], grid16)
    assert np.isclose(mixed_discriminant_integral(b1, b2), 4 * np.pi * 1.5 * 0.7, rtol=1e-12)


def test_ellipsoid_with_unit_axes_is_ball(grid24):
    e = make_preset("ellipsoid", [1.0, 1.0, 1.0], grid24)
    b = make_preset("ball", [1.0], grid24)
    assert np.isclose(area_integral(e), area_integral(b), rtol=1e-13)
    assert np.isclose(volume(e), volume(b), rtol=1e-13)


def test_ellipsoid_volume(grid32):
    e = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid32)
    assert abs(volume(e) / (4 / 3 * np.pi * 1.2 * 0.9) - 1) < 1e-7


def test_minkowski_inequality(grid24):
    # mixed area squared dominates the product of areas
    b1 = make_preset("ellipsoid", [1.3, 1.0, 0.8], grid24)
    b2 = make_preset("harmonic_perturbed_ball", [1.0, 2, 0, 0.05], grid24)
    assert mixed_discriminant_integral(b1, b2) ** 2 >= area_integral(b1) * area_integral(b2)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_volume_translation_invariant(a):
    b = make_preset("ellipsoid", [1.2, 1.0, 0.9], GRID)
    assert np.isclose(volume(b.translated(a)), volume(b), rtol=1e-12)
    assert np.isclose(area_integral(b.translated(a)), area_integral(b), rtol=1e-12)


def test_integral_report(grid16):
    b1 = make_preset("ball", [1.0], grid16)
    rep = integral_report(b1, make_preset("ball", [2.0], grid16)).as_dict()
    assert np.isclose(rep["mixed"], 8 * np.pi) and "note" in rep
    assert integral_report(b1).area2 is None


def test_minkowski_sum_polarization(grid24):
    b1 = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid24)
    b2 = make_preset("ball", [0.5], grid24)
    s = minkowski_sum(b1, b2)
    assert np.isclose(area_integral(s), area_integral(b1) + area_integral(b2)
                      + 2 * mixed_discriminant_integral(b1, b2), rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_determinant_comparison_nonnegative(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((2, 20, 2, 2))
    W1, W2 = A @ A.transpose(0, 2, 1), B @ B.transpose(0, 2, 1)
    assert np.all(determinant_comparison(W1, W2) >= -1e-12 * (1 + np.abs(W1).sum() + np.abs(W2).sum()))


def test_determinant_comparison_equality_case():
    W = np.eye(2)[None]
    np.testing.assert_allclose(determinant_comparison(W, W), 4.0)
    np.testing.assert_allclose(determinant_comparison(W, 0 * W), 2.0)


def test_certificate_translated_pair(grid24):
    b1 = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid24)
    cert = w22_certificate(b1, b1.translated([0.1, 0.0, -0.2]), "mean")
    assert cert.passed and cert.int_W_sq < 1e-12
    assert np.isclose(cert.area_sum_check, cert.integral_bound_rhs, rtol=1e-10)


def test_certificate_requires_condition(grid16):
    b1, b2 = make_preset("ball", [1.0], grid16), make_preset("ball", [1.2], grid16)
    with pytest.raises(HypothesisViolated):
        w22_certificate(b1, b2, "mean")


def test_certificate_chain_without_condition(grid24):
    # the pointwise lemma and comparison hold for any pair of convex bodies
    b1 = make_preset("ellipsoid", [1.2, 1.0, 0.9], grid24)
    b2 = make_preset("harmonic_perturbed_ball", [1.0, 3, 1, 0.03], grid24)
    cert = w22_certificate(b1, b2, "mean", require_condition=False)
    assert cert.pass_comparison and cert.pass_comparison_literal
    assert cert.condition_residual > 1e-3
    m = pointwise_margins(b1, b2, "mean")
    assert np.isclose(np.min(m["margin2"]), cert.margin2)
