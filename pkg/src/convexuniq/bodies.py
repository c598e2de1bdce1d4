"""Convex bodies described by their support functions on the unit sphere."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvexityError, DomainError, GridError
from .sphere import ScalarField, covariant_gradient, covariant_hessian, derivatives

PRESETS = ("ball", "ellipsoid", "harmonic_perturbed_ball")


@dataclass(frozen=True, eq=False)
class SupportBody:
    """A convex body given by its support function ``u`` sampled on a grid.

    ``provenance`` records how the body was made (preset name and parameters,
    a Minkowski sum, or an external file).  ``truncation`` holds the alias
    error of the band-limited representation for bodies whose support
    function is not band-limited (ellipsoids).
    """

    u: ScalarField
    provenance: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.u.grid

    @property
    def truncation(self):
        return {"band_limit": self.grid.L, "alias_error": self.u.alias_error}

    def translated(self, a):
        a = np.asarray(a, dtype=float)
        prov = dict(self.provenance)
        prov["center"] = (np.asarray(prov.get("center", np.zeros(3))) + a).tolist()
        return SupportBody(self.u + ScalarField.linear(self.grid, a), prov)

    def scaled(self, t):
        if t <= 0:
            raise DomainError(f"scale factor must be positive, got {t}")
        prov = {"kind": "scaled", "factor": float(t), "of": self.provenance}
        return SupportBody(self.u * float(t), prov)


@dataclass(frozen=True, eq=False)
class GradientMapField:
    """Per-node boundary points ``X_u(x) = sum_i u_i e_i + u x`` in R^3."""

    grid: object
    points: np.ndarray


def _center(params, start):
    rest = list(params[start:])
    if not rest:
        return np.zeros(3)
    if len(rest) != 3:
        raise DomainError(f"center must have three components, got {rest}")
    return np.asarray(rest, dtype=float)


def make_preset(kind, params, grid, check=True):
    """Build a preset body.

    ``ball``: ``[r, (ax, ay, az)]``; ``ellipsoid``: ``[a, b, c, (ax, ay, az)]``;
    ``harmonic_perturbed_ball``: ``[r, l, m, eps, (ax, ay, az)]`` with support
    function ``r + eps * Y_lm`` where ``Y_lm`` is the orthonormal real harmonic.
    """
    params = [float(p) for p in params]
    x = grid.nodes
    if kind == "ball":
        if not params:
            raise DomainError("ball needs a radius")
        r = params[0]
        if r <= 0:
            raise DomainError(f"ball radius must be positive, got {r}")
        a = _center(params, 1)
        values = r + x @ a
        prov = {"kind": "ball", "radius": r, "center": a.tolist()}
    elif kind == "ellipsoid":
        if len(params) < 3:
            raise DomainError("ellipsoid needs three semi-axes")
        axes = np.asarray(params[:3])
        if np.any(axes <= 0):
            raise DomainError(f"ellipsoid semi-axes must be positive, got {axes.tolist()}")
        a = _center(params, 3)
        values = np.sqrt((x**2) @ axes**2) + x @ a
        prov = {"kind": "ellipsoid", "axes": axes.tolist(), "center": a.tolist()}
    elif kind == "harmonic_perturbed_ball":
        if len(params) < 4:
            raise DomainError("harmonic_perturbed_ball needs r, l, m, eps")
        r, l, m, eps = params[:4]
        if r <= 0:
            raise DomainError(f"ball radius must be positive, got {r}")
        l, m = int(l), int(m)
        a = _center(params, 4)
        try:
            Y = grid.real_harmonic(l, m)
        except GridError as exc:
            raise DomainError(str(exc)) from exc
        values = r + eps * Y + x @ a
        prov = {"kind": "harmonic_perturbed_ball", "radius": r, "degree": l, "order": m,
                "amplitude": eps, "center": a.tolist()}
    else:
        raise DomainError(f"unknown preset {kind!r}; choose from {PRESETS}")
    body = SupportBody(ScalarField(grid, values), prov)
    if check:
        report = check_convexity(body.u)
        if not report["pass"]:
            raise ConvexityError(
                f"{kind} is not strictly convex on the grid: min eigenvalue {report['min_eig']:.3e} "
                f"at node {report['argmin_node']}",
                min_eig=report["min_eig"],
                node=report["argmin_node"],
            )
    return body


def minkowski_sum(b1, b2):
    """Minkowski sum: support functions add."""
    b1.grid.check_same(b2.grid)
    return SupportBody(b1.u + b2.u, {"kind": "minkowski_sum", "terms": [b1.provenance, b2.provenance]})


def _as_field(u):
    return u.u if isinstance(u, SupportBody) else u


def spherical_hessian(u, frame="thetaphi"):
    """``W_u = u_ij + u delta_ij``; accepts non-convex differences too."""
    u = _as_field(u)
    return covariant_hessian(u, frame).add_identity(u.smooth_values)


def check_convexity(u, margin=0.0):
    """Nodal strict-convexity check on the minimum eigenvalue of ``W_u``."""
    u = _as_field(u)
    eig = spherical_hessian(u).eigvalsh()[:, 0]
    k = int(np.argmin(eig))
    scale = max(1.0, float(np.max(np.abs(eig))))
    return {
        "min_eig": float(eig[k]),
        "argmin_node": k,
        "argmin_point": u.grid.nodes[k].tolist(),
        "pass": bool(eig[k] > margin + 1e-12 * scale),
        "grid_L": u.grid.L,
    }


def gradient_map(u):
    """Boundary point with outer normal x: ``X_u = u_1 e_1 + u_2 e_2 + u x``."""
    u = _as_field(u)
    grad = covariant_gradient(u)
    return GradientMapField(u.grid, grad.cartesian() + u.smooth_values[:, None] * u.grid.nodes)


def gradient_map_derivative(u):
    """Tangential derivatives ``(X_u)_i`` (shape ``(N, 2, 3)``) computed spectrally.

    Each Cartesian component of ``X_u`` is differentiated as a scalar field,
    independently of ``W``; the result should equal ``W_ij e_j``.
    """
    u = _as_field(u)
    X = gradient_map(u).points
    out = np.empty((u.grid.size, 2, 3))
    for a in range(3):
        g, _, _ = derivatives(ScalarField(u.grid, X[:, a]), 1)
        out[:, :, a] = g
    return out


def weingarten_image(u):
    """``W_ij e_j`` for comparison with :func:`gradient_map_derivative`."""
    W = spherical_hessian(_as_field(u)).matrices()
    e1, e2 = _as_field(u).grid.frame()
    E = np.stack([e1, e2], axis=1)
    return np.einsum("nij,nja->nia", W, E)


def ellipsoid_hessian_exact(axes, points):
    """Closed-form ``W`` of an ellipsoid's support function at unit vectors.

    Uses the 1-homogeneous extension ``h(X) = |diag(axes) X|``; its ambient
    Hessian restricted to the tangent plane is ``W``.  Returned as 3x3
    tangential tensors.
    """
    A2 = np.asarray(axes, dtype=float) ** 2
    x = np.asarray(points, dtype=float)
    h = np.sqrt((x**2) @ A2)
    Ax = x * A2
    D2 = (np.einsum("a,ab->ab", A2, np.eye(3))[None] * h[:, None, None] ** 2
          - np.einsum("na,nb->nab", Ax, Ax)) / h[:, None, None] ** 3
    P = np.eye(3)[None] - np.einsum("na,nb->nab", x, x)
    return P @ D2 @ P


def body_from_values(grid, values, provenance=None):
    return SupportBody(ScalarField(grid, values), provenance or {"kind": "field"})


__all__ = [
    "SupportBody", "GradientMapField", "make_preset", "minkowski_sum", "spherical_hessian",
    "check_convexity", "gradient_map", "gradient_map_derivative", "weingarten_image",
    "ellipsoid_hessian_exact", "body_from_values",
]
