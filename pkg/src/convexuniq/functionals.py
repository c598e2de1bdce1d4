"""Principal radii, curvature functionals and their linearisation between bodies."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
import scipy.integrate

from .bodies import SupportBody, check_convexity, make_preset, spherical_hessian
from .errors import ConvexityError, DomainError
from .sphere import ScalarField, SymMatrixField, derivatives

UMBILIC_RTOL = 1e-9
DISCRIMINANT_RTOL = 1e-12
SECANT_NODES = 16


# ------------------------------------------------------------------ functional
@dataclass(frozen=True)
class CurvatureFunctional:
    """A function ``f(y1, y2)`` of the ordered principal curvatures ``y1 >= y2``.

    ``box`` is the validity domain ``((y1_lo, y1_hi), (y2_lo, y2_hi))``.
    Construction samples the box and rejects functionals violating
    ``df/dy1 * df/dy2 > 0``.
    """

    name: str
    f: Callable
    df1: Callable
    df2: Callable
    symmetric: bool = False
    box: tuple = ((0.0, np.inf), (0.0, np.inf))

    def __post_init__(self):
        y1, y2 = self.sample_box()
        prod = self.df1(y1, y2) * self.df2(y1, y2)
        if not np.all(prod > 0):
            k = int(np.argmin(prod))
            raise DomainError(
                f"functional {self.name!r} violates df/dy1 * df/dy2 > 0 at "
                f"(y1, y2) = ({y1[k]:.4g}, {y2[k]:.4g})"
            )
        if self.symmetric and not np.allclose(self.f(y1, y2), self.f(y2, y1), rtol=1e-12, atol=1e-14):
            raise DomainError(f"functional {self.name!r} is flagged symmetric but f(y1, y2) != f(y2, y1)")

    def sample_box(self, n=24):
        axes = []
        for lo, hi in self.box:
            lo_f = lo if np.isfinite(lo) and lo > 0 else 1e-3
            hi_f = hi if np.isfinite(hi) else 1e3
            axes.append(np.geomspace(lo_f * (1 + 1e-9), hi_f * (1 - 1e-9), n))
        y1, y2 = np.meshgrid(*axes, indexing="ij")
        return y1.ravel(), y2.ravel()

    @property
    def increasing(self):
        """True when f increases in the curvatures (so F~ decreases in W)."""
        y1, y2 = self.sample_box(3)
        return bool(self.df1(y1[4], y2[4]) > 0)

    def in_box(self, y1, y2):
        (a, b), (c, d) = self.box
        return (y1 > a) & (y1 < b) & (y2 > c) & (y2 < d)


def _weighted(a, b):
    return CurvatureFunctional(
        f"weighted:{a:g},{b:g}",
        lambda y1, y2: a * y1 + b * y2,
        lambda y1, y2: a + 0.0 * y1,
        lambda y1, y2: b + 0.0 * y2,
        symmetric=a == b,
    )


def _power(p):
    return CurvatureFunctional(
        f"power:{p:g}",
        lambda y1, y2: y1**p + y2**p,
        lambda y1, y2: p * y1 ** (p - 1),
        lambda y1, y2: p * y2 ** (p - 1),
        symmetric=True,
    )


def _table(path):
    spec = json.loads(Path(path).read_text())
    terms = [(float(c), float(p), float(q)) for c, p, q in spec["terms"]]
    box = tuple(tuple(float(v) for v in pair) for pair in spec.get("box", [[0, "inf"], [0, "inf"]]))

    def f(y1, y2):
        return sum(c * y1**p * y2**q for c, p, q in terms)

    def df1(y1, y2):
        return sum(c * p * y1 ** (p - 1) * y2**q for c, p, q in terms if p != 0) + 0.0 * y1

    def df2(y1, y2):
        return sum(c * q * y1**p * y2 ** (q - 1) for c, p, q in terms if q != 0) + 0.0 * y2

    sym = sorted(terms) == sorted((c, q, p) for c, p, q in terms)
    return CurvatureFunctional(spec.get("name", f"table:{path}"), f, df1, df2, symmetric=sym, box=box)


MEAN = CurvatureFunctional("mean", lambda y1, y2: y1 + y2, lambda y1, y2: 1.0 + 0 * y1,
                           lambda y1, y2: 1.0 + 0 * y2, symmetric=True)
GAUSS = CurvatureFunctional("gauss", lambda y1, y2: y1 * y2, lambda y1, y2: y2 + 0 * y1,
                            lambda y1, y2: y1 + 0 * y2, symmetric=True)


def get_functional(name):
    """Look up ``mean``, ``gauss``, ``weighted:a,b``, ``power:p`` or ``table:path.json``."""
    if isinstance(name, CurvatureFunctional):
        return name
    kind, _, arg = name.partition(":")
    try:
        if kind == "mean" and not arg:
            return MEAN
        if kind == "gauss" and not arg:
            return GAUSS
        if kind == "weighted":
            a, b = (float(v) for v in arg.split(","))
            return _weighted(a, b)
        if kind == "power":
            return _power(float(arg))
        if kind == "table":
            return _table(arg)
    except (ValueError, KeyError, OSError) as exc:
        raise DomainError(f"malformed functional {name!r}: {exc}") from exc
    raise DomainError(f"unknown functional {name!r}; use mean, gauss, weighted:a,b, power:p or table:path")


# --------------------------------------------------------------- radii
def _matrices(W):
    if isinstance(W, SymMatrixField):
        return W.matrices()
    return np.asarray(W, dtype=float)


def principal_radii(W, rtol=DISCRIMINANT_RTOL):
    """Eigenvalues ``l1 <= l2`` from ``(s1 -+ sqrt(s1^2 - 4 s2)) / 2``.

    The discriminant is evaluated as ``(a - d)^2 + 4bc`` (algebraically equal,
    free of cancellation) and the smaller-magnitude root is recovered from
    ``l1 * l2 = s2``.
    """
    M = _matrices(W)
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    s1 = a + d
    s2 = a * d - b * c
    disc = (a - d) ** 2 + 4.0 * b * c
    scale = np.maximum(s1**2, a**2 + b**2 + c**2 + d**2)
    if np.any(disc < -rtol * scale):
        k = np.unravel_index(int(np.argmin(disc / np.where(scale > 0, scale, 1))), np.shape(disc))
        raise DomainError(f"negative discriminant {float(disc[k]):.3e}: matrix is not symmetric")
    root = np.sqrt(np.maximum(disc, 0.0))
    big = np.where(s1 >= 0, s1 + root, s1 - root) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        other = np.where(big != 0, s2 / np.where(big != 0, big, 1.0), 0.0)
    lam1 = np.where(s1 >= 0, other, big)
    lam2 = np.where(s1 >= 0, big, other)
    return lam1, lam2


def principal_curvatures(W):
    """``(k1, k2) = (1/l1, 1/l2)`` with ``k1 >= k2 > 0``."""
    lam1, lam2 = principal_radii(W)
    if np.any(lam1 <= 0):
        raise DomainError(f"matrix is not positive definite (min eigenvalue {float(np.min(lam1)):.3e})")
    return 1.0 / lam1, 1.0 / lam2


def _eigvecs(M):
    """Unit eigenvectors ``(v_small, v_big)`` of symmetric 2x2 matrices."""
    a, b, d = M[..., 0, 0], 0.5 * (M[..., 0, 1] + M[..., 1, 0]), M[..., 1, 1]
    psi = 0.5 * np.arctan2(2.0 * b, a - d)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.stack([-sp, cp], -1), np.stack([cp, sp], -1)


def _check_box(f, k1, k2):
    inside = f.in_box(k1, k2)
    if not np.all(inside):
        idx = np.unravel_index(int(np.argmin(inside)), np.shape(inside))
        raise DomainError(
            f"curvature pair ({float(k1[idx]):.4g}, {float(k2[idx]):.4g}) outside the validity box of {f.name!r}"
        )


def evaluate_functional(f, W):
    """``F~(W) = f(1/l1(W), 1/l2(W))``."""
    f = get_functional(f)
    k1, k2 = principal_curvatures(W)
    _check_box(f, k1, k2)
    return f.f(k1, k2)


def functional_derivative(f, W):
    """``dF~/dW_ij`` through the eigen-decomposition of ``W``.

    At umbilic points (``|l1 - l2| < 1e-9 (|l1| + |l2|)``) the isotropic
    selection ``1/2 (f_1 + f_2) * (-1/l^2) I`` is returned.
    """
    f = get_functional(f)
    M = _matrices(W)
    lam1, lam2 = principal_radii(M)
    if np.any(lam1 <= 0):
        raise DomainError(f"matrix is not positive definite (min eigenvalue {float(np.min(lam1)):.3e})")
    k1, k2 = 1.0 / lam1, 1.0 / lam2
    _check_box(f, k1, k2)
    f1, f2 = f.df1(k1, k2), f.df2(k1, k2)
    v1, v2 = _eigvecs(M)
    D = (
        (-f1 / lam1**2)[..., None, None] * np.einsum("...i,...j->...ij", v1, v1)
        + (-f2 / lam2**2)[..., None, None] * np.einsum("...i,...j->...ij", v2, v2)
    )
    umb = np.abs(lam1 - lam2) < UMBILIC_RTOL * (np.abs(lam1) + np.abs(lam2))
    if np.any(umb):
        lam = 0.5 * (lam1 + lam2)
        iso = (-0.5 * (f1 + f2) / lam**2)[..., None, None] * np.eye(2)
        D = np.where(umb[..., None, None], iso, D)
    return D


# ---------------------------------------------------------- coefficient fields
class Ellipticity(NamedTuple):
    lam: float
    Lam: float
    uniformly_elliptic: bool


def ellipticity_constants(F):
    """``(lam, Lam)`` = (min, max) nodal eigenvalue of a coefficient field."""
    field_ = F.field if isinstance(F, CoefficientField) else F
    eig = field_.eigvalsh() if isinstance(field_, SymMatrixField) else np.linalg.eigvalsh(np.asarray(field_))
    lam, Lam = float(np.min(eig)), float(np.max(eig))
    return Ellipticity(lam, Lam, lam > 0)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Coefficients ``F^ij(x)`` of the linear operator ``F^ij (u_ij + u delta_ij)``."""

    field: SymMatrixField
    provenance: dict = field(default_factory=dict)
    sampler: Callable | None = None

    @property
    def grid(self):
        return self.field.grid

    @property
    def ellipticity(self):
        return ellipticity_constants(self.field)

    @property
    def lam(self):
        return self.ellipticity.lam

    @property
    def Lam(self):
        return self.ellipticity.Lam

    def contract(self, W):
        return self.field.contract(W)

    def scaled(self, c):
        return CoefficientField(self.field * c, {**self.provenance, "scaled_by": float(c)})


def constant_coefficients(grid, M=np.eye(2), frame="thetaphi"):
    return CoefficientField(SymMatrixField.from_matrices(grid, M, frame), {"kind": "constant", "frame": frame,
                                                                          "matrix": np.asarray(M).tolist()})


def _closest_umbilic_t(M1, M2):
    # minimizer in [0, 1] of the discriminant (a - d)^2 + 4 b^2 of t M1 + (1 - t) M2
    a0 = M2[:, 0, 0] - M2[:, 1, 1]
    a1 = (M1[:, 0, 0] - M1[:, 1, 1]) - a0
    b0 = M2[:, 0, 1]
    b1 = M1[:, 0, 1] - b0
    den = a1**2 + 4.0 * b1**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ts = np.where(den > 0, -(a0 * a1 + 4.0 * b0 * b1) / np.where(den > 0, den, 1.0), 0.5)
    return np.clip(ts, 0.0, 1.0)


def coefficient_field_secant(f, W1, W2, quadrature_nodes=SECANT_NODES, normalize_sign=True):
    """``F^ij = int_0^1 dF~/dW_ij (t W1 + (1 - t) W2) dt`` by Gauss-Legendre in t.

    For non-symmetric f the integrand has a kink where the segment passes
    closest to the umbilic set; the interval is split there and each half is
    integrated adaptively.

    With ``normalize_sign`` the field of a functional increasing in the
    curvatures (hence decreasing in W) is negated so the stored field is
    positive definite; the sign is recorded in ``provenance``.
    """
    f = get_functional(f)
    W1.grid.check_same(W2.grid)
    M1, M2 = W1.matrices(), W2.in_frame(W1.frame).matrices()
    t, wt = np.polynomial.legendre.leggauss(quadrature_nodes)
    t, wt = 0.5 * (t + 1.0), 0.5 * wt
    if f.symmetric:
        pieces = [(np.zeros(len(M1)), np.ones(len(M1)))]
    else:
        # dF~/dW of a non-symmetric f has a kink where the segment passes closest
        # to the umbilic set; integrate separately on both sides of that point
        ts = _closest_umbilic_t(M1, M2)
        pieces = [(np.zeros_like(ts), ts), (ts, np.ones_like(ts))]
    def integrand(tn):
        Mt = tn[:, None, None] * M1 + (1.0 - tn)[:, None, None] * M2
        lam1, _ = principal_radii(Mt)
        if np.any(lam1 <= 0):
            n = int(np.argmin(lam1))
            raise DomainError(f"secant segment leaves positive matrices at node {n}, t={tn[n]:.4f}")
        k1, k2 = principal_curvatures(Mt)
        inside = f.in_box(k1, k2)
        if not np.all(inside):
            n = int(np.argmin(inside))
            raise DomainError(f"secant segment exits the validity box of {f.name!r} at node {n}, t={tn[n]:.4f}")
        return functional_derivative(f, Mt)

    acc = np.zeros_like(M1)
    adaptive = False
    for lo, hi in pieces:
        if f.symmetric:
            for tk, wk in zip(t, wt):
                acc += wk * integrand(lo + (hi - lo) * tk)
        else:
            adaptive = True
            out, _ = scipy.integrate.quad_vec(lambda s, lo=lo, hi=hi: (hi - lo)[:, None, None]
                                              * integrand(lo + (hi - lo) * s), 0.0, 1.0,
                                              epsabs=1e-14, epsrel=1e-13, quadrature="gk21")
            acc += out
    sign = -1.0 if (normalize_sign and f.increasing) else 1.0
    prov = {"kind": "secant", "functional": f.name, "sign": sign,
            "quadrature": "adaptive Gauss-Kronrod, split at umbilic approach" if adaptive
            else f"Gauss-Legendre, {int(quadrature_nodes)} nodes"}
    return CoefficientField(SymMatrixField.from_matrices(W1.grid, sign * acc, W1.frame), prov)


# ------------------------------------------------------------- lemma machinery
def null_solution_sample(F, rng=None):
    """Random symmetric ``W`` with ``F^ij W_ij = 0``.

    ``W11, W12 ~ U[-1, 1]`` and ``W22 = -(F11 W11 + 2 F12 W12) / F22``.
    """
    rng = np.random.default_rng(rng)
    F = np.asarray(F, dtype=float)
    shape = F.shape[:-2]
    w11 = rng.uniform(-1.0, 1.0, shape)
    w12 = rng.uniform(-1.0, 1.0, shape)
    w22 = -(F[..., 0, 0] * w11 + 2.0 * F[..., 0, 1] * w12) / F[..., 1, 1]
    return np.stack([np.stack([w11, w12], -1), np.stack([w12, w22], -1)], -2)


def lemma_det_check(F, W, lam, Lam, residual_tol=1e-10):
    """Check ``|W|^2 <= -(2 Lam / lam) det W`` for null pairs ``F^ij W_ij = 0``."""
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    resid = np.einsum("...ij,...ij->...", F, W)
    scale = np.linalg.norm(F, axis=(-2, -1)) * np.linalg.norm(W, axis=(-2, -1))
    if np.any(np.abs(resid) > residual_tol * np.maximum(scale, 1.0)):
        raise DomainError(f"constraint residual {float(np.max(np.abs(resid))):.3e} too large for a null pair")
    lhs = np.einsum("...ij,...ij->...", W, W)
    rhs = -(2.0 * np.asarray(Lam) / np.asarray(lam)) * np.linalg.det(W)
    ok = lhs <= rhs + 1e-12 * np.maximum(np.abs(rhs), lhs)
    return {"lhs": lhs, "rhs": rhs, "pass": ok}


@dataclass(frozen=True, eq=False)
class ConditionReport:
    residual: ScalarField
    max_abs: float
    functional: str


def check_condition(f, body1, body2):
    """Nodal residual ``F~(W_u1) - F~(W_u2)``; both bodies must be strictly convex."""
    f = get_functional(f)
    for name, b in (("body1", body1), ("body2", body2)):
        rep = check_convexity(b.u if isinstance(b, SupportBody) else b)
        if not rep["pass"]:
            raise ConvexityError(f"{name} is not strictly convex (min eigenvalue {rep['min_eig']:.3e})",
                                 rep["min_eig"], rep["argmin_node"])
    W1, W2 = spherical_hessian(body1), spherical_hessian(body2)
    res = evaluate_functional(f, W1) - evaluate_functional(f, W2)
    field_ = ScalarField(W1.grid, res)
    return ConditionReport(field_, field_.max_abs(), f.name)


# ------------------------------------------------------ coefficient presets
_AMBIENT = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]])
COEFFICIENT_PRESETS = ("identity", "conformal", "ambient", "twisted", "secant_mean")


def _tangential(grid, T):
    return SymMatrixField.from_cartesian(grid, T)


def coefficient_preset(name, grid):
    """Smooth, uniformly elliptic coefficient fields used by tests and the CLI."""
    x = grid.nodes
    if name == "identity":
        return constant_coefficients(grid)
    if name == "conformal":
        s = 1.0 + 0.3 * x[:, 2] + 0.2 * x[:, 0] * x[:, 1]
        fld = SymMatrixField.from_matrices(grid, s[:, None, None] * np.eye(2))
    elif name == "ambient":
        fld = _tangential(grid, _AMBIENT)
    elif name == "twisted":
        w = np.stack([np.sin(2 * x[:, 0]), x[:, 1] * x[:, 2], np.cos(x[:, 1])], -1)
        fld = _tangential(grid, np.eye(3)[None] + 0.8 * np.einsum("na,nb->nab", w, w))
    elif name == "secant_mean":
        W1 = spherical_hessian(make_preset("ball", [1.0], grid))
        W2 = spherical_hessian(make_preset("ellipsoid", [1.1, 1.0, 0.95], grid))
        out = coefficient_field_secant(MEAN, W1, W2)
        return CoefficientField(out.field, {**out.provenance, "preset": name})
    else:
        raise DomainError(f"unknown coefficient preset {name!r}; choose from {COEFFICIENT_PRESETS}")
    return CoefficientField(fld, {"kind": "preset", "preset": name})


def coefficient_gradient(F):
    """Covariant derivative ``F^ij_{,k}`` (shape ``(N, 2, 2, 2)``, index ``[i, j, k]``).

    The Cartesian components of the tangential tensor are differentiated as
    scalar fields and projected back onto the frame.
    """
    grid = F.grid
    T = F.field.in_frame("thetaphi").cartesian()
    e1, e2 = grid.frame()
    E = np.stack([e1, e2], axis=1)
    dT = np.empty((grid.size, 3, 3, 2))
    for a in range(3):
        for b in range(a, 3):
            g, _, _ = derivatives(ScalarField(grid, T[:, a, b]), 1)
            dT[:, a, b] = dT[:, b, a] = g
    return np.einsum("nia,njb,nabk->nijk", E, E, dT)


def coefficient_c1_norm(F):
    """Sup over nodes of ``(sum_ijk (F^ij_{,k})^2)^(1/2)``."""
    dF = coefficient_gradient(F)
    return float(np.max(np.sqrt(np.sum(dF**2, axis=(1, 2, 3)))))
