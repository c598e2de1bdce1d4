"""Maximum-principle diagnostics for the difference of two support functions.

For a function ``u`` on the sphere, ``X_u`` is its gradient map,
``rho_u = |X_u|^2`` and ``phi_E = <E, X_u>``.  With the Codazzi tensor
``W_ijk = u_ij;k + u_k delta_ij`` (fully symmetric) one has, for every u,

    grad rho = 2 W grad u,                 grad phi_E = W <E, e_k>,
    1/2 F^ij rho_ij = F^ij W_ijk u_k - u F^ij W_ij + F^ij W_ik W_kj,
    F^ij (phi_E)_ij = <E, e_k> F^ij W_ijk - (F^ij W_ij) <E, x>.

When ``F^ij W_ij = 0`` on an open set the middle term drops and the
differentiated equation turns ``F^ij W_ijk`` into ``-F^ij_,k W_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .bodies import SupportBody, gradient_map, spherical_hessian
from .errors import DomainError, GridError, HypothesisViolated
from .functionals import CoefficientField, check_condition, coefficient_gradient, ellipticity_constants
from .sphere import ScalarField, SymMatrixField, covariant_third, derivatives, derivatives_at

DEGENERACY_CUTOFF = 1e-8
MAX_SET_RTOL = 1e-6


def _field(u):
    return u.u if isinstance(u, SupportBody) else u


def _mats(entries):
    return np.stack([np.stack([entries[:, 0], entries[:, 1]], -1), np.stack([entries[:, 1], entries[:, 2]], -1)], -2)


def rho_field(u):
    """``rho_u = |X_u|^2``."""
    u = _field(u)
    X = gradient_map(u).points
    return ScalarField(u.grid, np.einsum("na,na->n", X, X))


def rho_at(u, points):
    """``rho_u`` at arbitrary unit vectors from the spectral representation."""
    u = _field(u)
    grad, _, _, _ = derivatives_at(u, points, 1)
    return np.einsum("ni,ni->n", grad, grad) + u.evaluate(points) ** 2


def refine_max(fn, grid, values):
    """Continuous maximum of ``fn`` near the best grid node.

    ``fn`` maps ``(P, 3)`` unit vectors to values.  Returns ``(value, point, node)``.
    """
    k = int(np.argmax(values))
    p = grid.nodes[k]
    a1 = np.cross(p, [1.0, 0.0, 0.0] if abs(p[0]) < 0.9 else [0.0, 1.0, 0.0])
    a1 /= np.linalg.norm(a1)
    a2 = np.cross(p, a1)

    def point(t):
        x = p + t[0] * a1 + t[1] * a2
        return x / np.linalg.norm(x)

    res = scipy.optimize.minimize(lambda t: -fn(point(t)[None])[0], np.zeros(2), method="Nelder-Mead",
                                  options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
    x = point(res.x)
    val = float(fn(x[None])[0])
    if val < values[k]:
        return float(values[k]), p, k
    return val, x, k


def rho_max(u):
    """``(max rho_u, maximizer, best grid node)`` with the maximum refined off the grid."""
    u = _field(u)
    return refine_max(lambda pts: rho_at(u, pts), u.grid, rho_field(u).values)


def _unit(E):
    E = np.asarray(E, dtype=float)
    if E.shape != (3,) or abs(np.linalg.norm(E) - 1.0) > 1e-12:
        raise DomainError(f"E must be a unit 3-vector, got {E.tolist()}")
    return E


def phi_field(u, E):
    """``phi_E = <E, X_u>``."""
    u = _field(u)
    return ScalarField(u.grid, gradient_map(u).points @ _unit(E))


def codazzi_tensor(u):
    """``W_ijk = u_ij;k + u_k delta_ij`` in the chart frame, ``(N, 2, 2, 2)``, index ``[i, j, k]``."""
    u = _field(u)
    if u.grid.L < 4:
        raise GridError(f"band limit {u.grid.L} too low for third derivatives (need L >= 4)")
    third = covariant_third(u)
    grad, _, _ = derivatives(u, 3)
    W3 = third.copy()
    W3[:, 0, 0, :] += grad
    W3[:, 1, 1, :] += grad
    return W3


def _F(F):
    if isinstance(F, CoefficientField):
        F = F.field
    return F.in_frame("thetaphi").matrices()


def _hess_terms(u):
    grad, _, _ = derivatives(u, 3)
    W = _mats(spherical_hessian(u).entries)
    return grad, W, codazzi_tensor(u)


def identity_check_rho(u, F):
    """Both sides of the second-derivative identity for ``rho_u``, computed independently.

    ``lhs`` differentiates the nodal ``rho_u`` twice; ``rhs`` uses third
    derivatives of ``u``.  ``residual_short`` drops the ``u F^ij W_ij`` term,
    which only vanishes where the equation holds.
    """
    u = _field(u)
    Fm = _F(F)
    grad, W, W3 = _hess_terms(u)
    rho = rho_field(u)
    rg, rh, _ = derivatives(rho, 2)
    lhs = 0.5 * (Fm[:, 0, 0] * rh[:, 0] + 2 * Fm[:, 0, 1] * rh[:, 1] + Fm[:, 1, 1] * rh[:, 2])
    FW3 = np.einsum("nij,nijk->nk", Fm, W3)
    FW = np.einsum("nij,nij->n", Fm, W)
    FWW = np.einsum("nij,nik,nkj->n", Fm, W, W)
    t1 = np.einsum("nk,nk->n", FW3, grad)
    uval = u.smooth_values
    rhs = t1 - uval * FW + FWW
    grad_resid = np.linalg.norm(rg - 2.0 * np.einsum("nij,nj->ni", W, grad), axis=1)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "residual": np.abs(lhs - rhs),
        "max_residual": float(np.max(np.abs(lhs - rhs))),
        "residual_short": np.abs(lhs - (t1 + FWW)),
        "gradient_residual_max": float(np.max(grad_resid)),
        "codazzi_asymmetry": float(np.max(np.abs(W3 - np.transpose(W3, (0, 1, 3, 2))))),
    }


def identity_check_phi(u, F, E, tier="A"):
    """Second-derivative identity for ``phi_E``.

    Tier ``A`` holds for every u.  Tier ``B`` is the form valid when
    ``F^ij W_ij`` vanishes identically: ``F^ij (phi_E)_ij = -<E, e_k> F^ij_,k W_ij``.
    Its residual equals ``<E, e_k> (F^ij W_ij)_,k - (F^ij W_ij) <E, x>`` and the
    report carries that bound.
    """
    u = _field(u)
    E = _unit(E)
    grid = u.grid
    Fm = _F(F)
    grad, W, W3 = _hess_terms(u)
    phi = phi_field(u, E)
    pg, ph, _ = derivatives(phi, 2)
    lhs = Fm[:, 0, 0] * ph[:, 0] + 2 * Fm[:, 0, 1] * ph[:, 1] + Fm[:, 1, 1] * ph[:, 2]
    e1, e2 = grid.frame()
    Ek = np.stack([e1 @ E, e2 @ E], -1)
    Ex = grid.nodes @ E
    FW = np.einsum("nij,nij->n", Fm, W)
    grad_resid = float(np.max(np.linalg.norm(pg - np.einsum("nij,nj->ni", W, Ek), axis=1)))
    if tier == "A":
        rhs = np.einsum("nk,nk->n", Ek, np.einsum("nij,nijk->nk", Fm, W3)) - FW * Ex
        out = {"tier": "A"}
    elif tier == "B":
        if not isinstance(F, CoefficientField):
            raise DomainError("tier B needs a CoefficientField to differentiate")
        dF = coefficient_gradient(F)
        rhs = -np.einsum("nk,nijk,nij->n", Ek, dF, W)
        FWfield = ScalarField(grid, FW)
        dFW, _, _ = derivatives(FWfield, 1)
        bound = np.abs(np.einsum("nk,nk->n", Ek, dFW)) + np.abs(FW * Ex)
        out = {"tier": "B", "bound": bound, "max_bound": float(np.max(bound))}
    else:
        raise DomainError(f"unknown tier {tier!r}")
    resid = np.abs(lhs - rhs)
    out.update(lhs=lhs, rhs=rhs, residual=resid, max_residual=float(np.max(resid)), gradient_residual_max=grad_resid)
    return out


def adapted_coefficients(u):
    """Coefficients annihilating ``W_u`` wherever ``W_u`` is indefinite.

    ``F = I - (tr W / |W|^2) W`` has ``F^ij W_ij = 0`` and is positive definite
    exactly where ``det W < 0``; its derivative follows from ``W_ijk``.
    Returns ``(F, dF, mask)`` as nodal arrays; outside ``mask`` the identity is
    stored and ``dF = 0``.
    """
    u = _field(u)
    _, W, W3 = _hess_terms(u)
    det = np.linalg.det(W)
    n2 = np.einsum("nij,nij->n", W, W)
    mask = (det < -DEGENERACY_CUTOFF * n2) & (n2 > 0)
    tr = W[:, 0, 0] + W[:, 1, 1]
    s = np.where(mask, tr / np.where(mask, n2, 1.0), 0.0)
    F = np.eye(2)[None] - s[:, None, None] * W
    dtr = W3[:, 0, 0, :] + W3[:, 1, 1, :]
    dn2 = 2.0 * np.einsum("nij,nijk->nk", W, W3)
    ds = np.where(mask[:, None], (dtr * n2[:, None] - tr[:, None] * dn2) / np.where(mask, n2, 1.0)[:, None] ** 2, 0.0)
    dF = -(ds[:, None, None, :] * W[..., None] + s[:, None, None, None] * W3)
    return SymMatrixField.from_matrices(u.grid, F), dF, mask


def lower_bound_check(u, F, which="rho", E=None, dF=None, mask=None, tol=1e-8):
    """Margin of ``F^ij f_ij + C |grad f| >= 0`` for ``f = rho_u`` or ``phi_E``.

    ``C = 2 (Lam / lam) sup |grad F|``: in two dimensions the cofactor ``A`` of
    ``W`` has ``|A| = |W|`` and ``W^-1 = A / det W``, so the determinant lemma
    ``|W|^2 <= -(2 Lam / lam) det W`` gives ``|W| |W^-1| <= 2 Lam / lam``.
    Only nodes with ``|det W| > 1e-8 |W|^2`` (and inside ``mask`` when given)
    are used, and the constants are taken over those nodes.
    """
    u = _field(u)
    grid = u.grid
    if isinstance(F, CoefficientField):
        Fm = _F(F)
        if dF is None:
            dF = coefficient_gradient(F)
    else:
        Fm = F.in_frame("thetaphi").matrices() if isinstance(F, SymMatrixField) else np.asarray(F)
        if dF is None:
            raise DomainError("pointwise coefficients need their derivative dF")
    W = _mats(spherical_hessian(u).entries)
    det = np.abs(np.linalg.det(W))
    n2 = np.einsum("nij,nij->n", W, W)
    scale = max(1.0, float(np.max(np.abs(u.smooth_values))))
    ok = (det > DEGENERACY_CUTOFF * n2) & (np.sqrt(n2) > 1e-10 * scale)
    if mask is not None:
        ok &= np.asarray(mask, dtype=bool)
    if not np.any(ok):
        raise DomainError("every node is degenerate (|det W| below the cutoff); the bound is not defined")
    eig = np.linalg.eigvalsh(Fm[ok])
    lam, Lam = float(np.min(eig)), float(np.max(eig))
    if lam <= 0:
        raise DomainError("coefficients not positive definite on the admissible nodes")
    dnorm = float(np.max(np.sqrt(np.sum(dF[ok] ** 2, axis=(1, 2, 3)))))
    C = 2.0 * Lam / lam * dnorm
    if which == "rho":
        f = rho_field(u)
    elif which == "phi":
        f = phi_field(u, E)
    else:
        raise DomainError(f"which must be 'rho' or 'phi', got {which!r}")
    g, h, _ = derivatives(f, 2)
    Ff = Fm[:, 0, 0] * h[:, 0] + 2 * Fm[:, 0, 1] * h[:, 1] + Fm[:, 1, 1] * h[:, 2]
    margin = Ff + C * np.linalg.norm(g, axis=1)
    m = float(np.min(margin[ok]))
    return {
        "margin": np.where(ok, margin, np.nan),
        "min_margin": m,
        "C": C,
        "lam": lam,
        "Lam": Lam,
        "grad_F_sup": dnorm,
        "admissible_nodes": int(ok.sum()),
        "excluded_nodes": int((~ok).sum()),
        "pass": bool(m >= -tol * max(1.0, float(np.max(np.abs(Ff[ok]))))),
    }


# ----------------------------------------------------------------- max sets
def grid_adjacency(grid):
    """Sparse adjacency of grid nodes: latitude/longitude neighbours, with each
    polar ring closed around its pole."""
    nlat, nlon = grid.nlat, grid.nlon
    idx = np.arange(grid.size).reshape(nlat, nlon)
    rows = [idx.ravel(), idx[:-1].ravel()]
    cols = [np.roll(idx, -1, axis=1).ravel(), idx[1:].ravel()]
    for ring in (idx[0], idx[-1]):
        a, b = np.meshgrid(ring, ring)
        rows.append(a.ravel())
        cols.append(b.ravel())
    r, c = np.concatenate(rows), np.concatenate(cols)
    A = scipy.sparse.coo_matrix((np.ones(len(r)), (r, c)), shape=(grid.size, grid.size))
    return (A + A.T).tocsr()


@dataclass(frozen=True)
class MaxSetReport:
    max_value: float
    nodes: np.ndarray
    n_components: int
    isolated: bool
    isolated_components: int
    tol: float
    caveat: str = ("isolation is judged at grid resolution: a component counts as isolated when it fits in a "
                   "geodesic ball of one grid spacing; a larger tolerance widens the set")

    def as_dict(self):
        return {"max_value": self.max_value, "nodes": self.nodes.tolist(), "n_components": self.n_components,
                "isolated": self.isolated, "isolated_components": self.isolated_components, "tol": self.tol,
                "caveat": self.caveat}


def max_set(f, tol=None):
    """Nodes within ``tol`` of the maximum, their connected components and isolation."""
    grid = f.grid
    vals = f.values
    vmax, vmin = float(np.max(vals)), float(np.min(vals))
    if tol is None:
        tol = max(MAX_SET_RTOL * (vmax - vmin), 1e-10 * max(abs(vmax), abs(vmin), 1e-300))
    nodes = np.nonzero(vals >= vmax - tol)[0]
    sub = grid_adjacency(grid)[nodes][:, nodes]
    n, labels = connected_components(sub, directed=False)
    iso = 0
    for k in range(n):
        pts = grid.nodes[nodes[labels == k]]
        c = pts.sum(axis=0)
        c = c / np.linalg.norm(c) if np.linalg.norm(c) > 0 else pts[0]
        if np.max(np.arccos(np.clip(pts @ c, -1, 1))) <= grid.spacing:
            iso += 1
    return MaxSetReport(vmax, nodes, int(n), iso > 0, iso, float(tol))


# ------------------------------------------------------ translation witness
@dataclass(frozen=True, eq=False)
class TranslationWitness:
    verdict: str
    translation: np.ndarray
    p0: np.ndarray | None
    E: np.ndarray | None
    u_tilde: ScalarField | None
    grad_u_tilde_on_max: float | None
    u_tilde_max: float | None
    rho_max: float
    linear_residual: float
    condition_residual: float

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "translation": self.translation.tolist(),
            "p0": None if self.p0 is None else self.p0.tolist(),
            "E": None if self.E is None else self.E.tolist(),
            "grad_u_tilde_on_max": self.grad_u_tilde_on_max,
            "u_tilde_max": self.u_tilde_max,
            "rho_max": self.rho_max,
            "linear_residual": self.linear_residual,
            "condition_residual": self.condition_residual,
        }


def linear_part(u):
    """``a`` minimizing ``||u - <a, x>||_L2``: ``a = 3/(4 pi) int u x``."""
    u = _field(u)
    return 3.0 / (4.0 * np.pi) * (u.grid.weights * u.smooth_values) @ u.grid.nodes


def translation_witness(body1, body2, f, tol_condition=1e-9, tol=1e-6):
    """Decide whether body2 is body1 translated, following the maximum-principle argument.

    The recovered translation ``a`` satisfies ``u2 = u1 + <a, x>``.
    """
    cond = check_condition(f, body1, body2)
    if cond.max_abs > tol_condition:
        raise HypothesisViolated(
            f"curvature condition residual {cond.max_abs:.3e} exceeds {tol_condition:.1e}", cond.max_abs
        )
    u = _field(body1) - _field(body2)
    rho = rho_field(u)
    rho_max = float(np.max(rho.values))
    a = -linear_part(u)
    lin_resid = float(np.max(np.abs(u.smooth_values + u.grid.nodes @ a)))
    if np.sqrt(rho_max) <= tol:
        return TranslationWitness("identical", np.zeros(3), None, None, None, None, None, rho_max, lin_resid,
                                  cond.max_abs)
    k = int(np.argmax(rho.values))
    p0 = u.grid.nodes[k]
    X = gradient_map(u).points[k]
    E = X / np.linalg.norm(X)
    ut = u - ScalarField.linear(u.grid, np.sqrt(rho.values[k]) * E)
    ms = max_set(phi_field(u, E))
    g, _, _ = derivatives(ut, 1)
    grad_on_max = float(np.max(np.linalg.norm(g[ms.nodes], axis=1)))
    verdict = "equal_up_to_translation" if lin_resid <= tol else "not_translates"
    return TranslationWitness(verdict, a, p0, E, ut, grad_on_max, ut.max_abs(), rho_max, lin_resid, cond.max_abs)
