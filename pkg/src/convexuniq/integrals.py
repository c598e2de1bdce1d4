"""Determinant integrals of support functions and the integrated W^{2,2} bound.

``area = int det W_u`` is the surface area of the body (the Jacobian of the
inverse Gauss map is ``det W``); ``volume = 1/3 int u det W_u``.  The mixed
integral is the polarization of ``area``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .bodies import SupportBody, spherical_hessian
from .errors import HypothesisViolated
from .functionals import check_condition, coefficient_field_secant, get_functional

NORMALIZATION_NOTE = (
    "the bound's V-terms are implemented as area-type integrals int det W and their polarization; "
    "the left side has area dimensions, so volume notation would be dimensionally inconsistent"
)


def _W(body):
    return spherical_hessian(body)


def area_integral(body):
    return float(body.grid.integrate(_W(body).det()))


def mixed_discriminant_integral(b1, b2):
    b1.grid.check_same(b2.grid)
    W1, W2 = _W(b1), _W(b2)
    mixed = 0.5 * ((W1 + W2).det() - W1.det() - W2.det())
    return float(b1.grid.integrate(mixed))


def volume(body):
    return float(body.grid.integrate(body.u.smooth_values * _W(body).det()) / 3.0)


@dataclass(frozen=True)
class IntegralReport:
    area1: float
    area2: float | None
    volume1: float
    volume2: float | None
    mixed: float | None
    resolution: int
    note: str = NORMALIZATION_NOTE

    def as_dict(self):
        return asdict(self)


def integral_report(b1, b2=None):
    return IntegralReport(
        area1=area_integral(b1),
        area2=None if b2 is None else area_integral(b2),
        volume1=volume(b1),
        volume2=None if b2 is None else volume(b2),
        mixed=None if b2 is None else mixed_discriminant_integral(b1, b2),
        resolution=b1.grid.L,
    )


def determinant_comparison(W1, W2):
    """``det(W1 + W2) + det(W1 - W2)`` for stacks of 2x2 matrices; nonnegative for PSD pairs."""
    W1, W2 = np.asarray(W1, dtype=float), np.asarray(W2, dtype=float)
    return np.linalg.det(W1 + W2) + np.linalg.det(W1 - W2)


@dataclass(frozen=True)
class W22Certificate:
    int_W_sq: float
    int_minus_det_W: float
    int_det_W_sum: float
    lam: float
    Lam: float
    margin1: float
    margin2: float
    margin2_literal: float
    integral_bound_lhs: float
    integral_bound_rhs: float
    pass_pointwise: bool
    pass_comparison: bool
    pass_comparison_literal: bool
    pass_integral: bool
    condition_residual: float
    area_sum_check: float
    note: str = NORMALIZATION_NOTE

    @property
    def passed(self):
        return self.pass_pointwise and self.pass_comparison and self.pass_integral

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def w22_certificate(b1: SupportBody, b2: SupportBody, f, tol_condition=1e-9, require_condition=True,
                    rtol=1e-10):
    """Pointwise and integrated chain bounding ``int |W_u|^2`` for ``u = u1 - u2``.

    ``margin1 = min [-(2 Lam/lam) det W_u - |W_u|^2]`` (determinant lemma),
    ``margin2 = min [det W_(u1+u2) + det W_u]`` (sign-corrected comparison) and
    ``margin2_literal = min [det W_(u1+u2) - det W_u]``.  The integrated bound is
    ``int |W_u|^2 <= (2 Lam/lam) int det W_(u1+u2)``; the right side equals
    ``(2 Lam/lam) (area1 + area2 + 2 mixed)``, reported as ``area_sum_check``.
    """
    f = get_functional(f)
    cond = check_condition(f, b1, b2)
    if require_condition and cond.max_abs > tol_condition:
        raise HypothesisViolated(
            f"curvature condition residual {cond.max_abs:.3e} exceeds {tol_condition:.1e}", cond.max_abs
        )
    W1, W2 = _W(b1), _W(b2)
    Wu = W1 - W2
    Ws = W1 + W2
    F = coefficient_field_secant(f, W1, W2)
    ell = F.ellipticity
    k = 2.0 * ell.Lam / ell.lam
    grid = b1.grid
    sq = Wu.frob2()
    detu = Wu.det()
    dets = Ws.det()
    m1 = -k * detu - sq
    m2 = dets + detu
    m2l = dets - detu
    lhs = float(grid.integrate(sq))
    rhs = float(k * grid.integrate(dets))
    scale = max(1.0, float(np.max(np.abs(dets))))
    area_sum = area_integral(b1) + area_integral(b2) + 2.0 * mixed_discriminant_integral(b1, b2)
    return W22Certificate(
        int_W_sq=lhs,
        int_minus_det_W=float(grid.integrate(-detu)),
        int_det_W_sum=float(grid.integrate(dets)),
        lam=float(ell.lam),
        Lam=float(ell.Lam),
        margin1=float(np.min(m1)),
        margin2=float(np.min(m2)),
        margin2_literal=float(np.min(m2l)),
        integral_bound_lhs=lhs,
        integral_bound_rhs=rhs,
        pass_pointwise=bool(np.min(m1) >= -rtol * scale * k),
        pass_comparison=bool(np.min(m2) >= -rtol * scale),
        pass_comparison_literal=bool(np.min(m2l) >= -rtol * scale),
        pass_integral=bool(lhs <= rhs * (1 + rtol) + rtol),
        condition_residual=float(cond.max_abs),
        area_sum_check=float(k * area_sum),
    )


def pointwise_margins(b1, b2, f):
    """Nodal margin arrays (for CSV export) of the certificate chain."""
    f = get_functional(f)
    W1, W2 = _W(b1), _W(b2)
    F = coefficient_field_secant(f, W1, W2)
    k = 2.0 * F.Lam / F.lam
    Wu, Ws = W1 - W2, W1 + W2
    return {
        "margin1": -k * Wu.det() - Wu.frob2(),
        "margin2": Ws.det() + Wu.det(),
        "margin2_literal": Ws.det() - Wu.det(),
    }


__all__ = [
    "area_integral", "mixed_discriminant_integral", "volume", "IntegralReport", "integral_report",
    "determinant_comparison", "W22Certificate", "w22_certificate", "pointwise_margins",
]
