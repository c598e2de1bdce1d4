"""The operator ``L[u] = F^ij (u_ij + u delta_ij)`` on the sphere and its kernel.

Also: coefficient mollification, the 1-homogeneous extension to R^3 and the
finite-difference checks relating the two formulations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bodies import SupportBody, spherical_hessian
from .errors import DomainError, SolverError
from .functionals import CoefficientField, constant_coefficients
from .sphere import ScalarField, SymMatrixField, derivatives, derivatives_at, frame_derivatives

# tau = C * h^2 * Lam.  `calibrate_threshold(16)` gives about 8e-6 (geometric mean of the
# third and fourth singular values for F == I); the frozen value sits below it.
DEFAULT_THRESHOLD_C = 3e-6
LINEAR_INDEX = slice(1, 4)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Singular values below ``tau`` count as zero.

    ``kind="h2"``: ``tau = C * h^2 * Lam`` with grid spacing ``h`` and the
    largest coefficient eigenvalue ``Lam``.  ``kind="relative"``:
    ``tau = C * sigma_max``.
    """

    kind: str = "h2"
    C: float = DEFAULT_THRESHOLD_C

    def threshold(self, op, sigma_max):
        if self.kind == "h2":
            return self.C * op.grid.spacing**2 * max(abs(op.coefficients.Lam), abs(op.coefficients.lam))
        if self.kind == "relative":
            return self.C * sigma_max
        raise DomainError(f"unknown threshold policy {self.kind!r}")

    def as_dict(self):
        return {"kind": self.kind, "C": self.C}


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """Collocation matrix of ``L`` from real spherical-harmonic coefficients to nodal values.

    ``weighted`` multiplies rows by the square roots of the quadrature
    weights so singular values are measured in L^2.  The operator is not
    self-adjoint in general.
    """

    grid: object
    coefficients: CoefficientField
    matrix: np.ndarray
    note: str = "non-self-adjoint; kernel detected from singular values"

    @property
    def weighted(self):
        return np.sqrt(self.grid.weights)[:, None] * self.matrix

    def apply(self, u):
        """``F^ij W_ij`` evaluated directly from the field (independent of the matrix)."""
        return ScalarField(self.grid, self.coefficients.contract(spherical_hessian(u)))

    def apply_coeffs(self, a):
        return self.matrix @ a


def _basis_hessians(grid, start, stop):
    eye = np.zeros((stop - start, grid.ncoef))
    eye[np.arange(stop - start), np.arange(start, stop)] = 1.0
    coeffs = grid.from_real(eye)
    p = {k: grid.synthesize(coeffs, *k) for k in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}
    _, hess, _ = frame_derivatives(p, grid.node_theta, 2)
    hess[..., 0] += p[0, 0]
    hess[..., 2] += p[0, 0]
    return hess


def assemble_global(F, block=256):
    """Assemble ``u -> F^ij (u_ij + u delta_ij)`` on the degree-L coefficient space."""
    ell = F.ellipticity
    if not ell.uniformly_elliptic:
        raise DomainError(
            f"coefficient field is not uniformly elliptic (lam = {ell.lam:.3e}); degenerate problems are out of scope"
        )
    grid = F.grid
    Fe = F.field.in_frame("thetaphi").entries
    M = np.empty((grid.size, grid.ncoef))
    for start in range(0, grid.ncoef, block):
        stop = min(start + block, grid.ncoef)
        W = _basis_hessians(grid, start, stop)
        M[:, start:stop] = (Fe[:, 0] * W[..., 0] + 2.0 * Fe[:, 1] * W[..., 1] + Fe[:, 2] * W[..., 2]).T
    return AssembledOperator(grid, F, M)


@dataclass(frozen=True, eq=False)
class KernelReport:
    singular_values: np.ndarray
    kernel_dim: int
    basis: list
    projection_residual: float | None
    lowest3_projection_residual: float
    gap_ratio: float
    resolution: int
    threshold: float
    policy: dict
    scheme: str = "spectral"

    def as_dict(self):
        return {
            "singular_values": [float(s) for s in self.singular_values],
            "kernel_dim": int(self.kernel_dim),
            "projection_residual": self.projection_residual,
            "lowest3_projection_residual": self.lowest3_projection_residual,
            "gap_ratio": self.gap_ratio,
            "resolution": self.resolution,
            "threshold": self.threshold,
            "policy": self.policy,
            "scheme": self.scheme,
        }


def _projection_residual(V):
    """Worst relative L^2 distance of coefficient vectors (columns) from span{x1, x2, x3}."""
    if V.shape[1] == 0:
        return None
    tail = V.copy()
    tail[LINEAR_INDEX] = 0.0
    return float(np.max(np.linalg.norm(tail, axis=0) / np.linalg.norm(V, axis=0)))


def kernel_analysis(op, policy=None, nreport=8):
    """Smallest singular triplets of the weighted operator and the resulting kernel."""
    policy = policy or ThresholdPolicy()
    try:
        _, s, Vt = scipy.linalg.svd(op.weighted, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        try:
            _, s, Vt = scipy.linalg.svd(op.weighted, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc2:
            raise SolverError(f"SVD failed (gesdd: {exc}; gesvd: {exc2}) on a {op.weighted.shape} matrix") from exc2
    s_asc = s[::-1]
    V = Vt[::-1].T
    tau = policy.threshold(op, float(s[0]))
    dim = int(np.sum(s_asc < tau))
    basis = [ScalarField.from_coeffs(op.grid, op.grid.from_real(V[:, k])) for k in range(dim)]
    gap = float(s_asc[3] / s_asc[2]) if s_asc[2] > 0 else float("inf")
    return KernelReport(
        singular_values=s_asc[:nreport].copy(),
        kernel_dim=dim,
        basis=basis,
        projection_residual=_projection_residual(V[:, :dim]),
        lowest3_projection_residual=_projection_residual(V[:, :3]),
        gap_ratio=gap,
        resolution=op.grid.L,
        threshold=float(tau),
        policy=policy.as_dict(),
    )


def calibrate_threshold(L=16):
    """Threshold constant placing tau midway (geometrically) between the 3rd and 4th
    singular values of the ``F == I`` operator at band limit ``L``."""
    from .sphere import build_grid

    grid = build_grid(L)
    op = assemble_global(constant_coefficients(grid))
    s = scipy.linalg.svdvals(op.weighted)[::-1]
    return float(np.sqrt(max(s[2], 1e-300) * s[3]) / grid.spacing**2)


# ------------------------------------------------------------------ mollifier
def _heat(grid, eps):
    ell = np.arange(grid.L + 1)
    return np.exp(-0.5 * eps**2 * ell * (ell + 1.0))[None, :]


def _tangent_projector(points):
    return np.eye(3)[None] - np.einsum("na,nb->nab", points, points)


def _cartesian_sampler(grid, T, factor=1.0):
    """Off-grid evaluator of a tangential tensor field given by Cartesian nodal values.

    Trace and traceless parts are band-limited separately (each multiplied by
    ``factor`` per degree) and recombined in the tangent plane of the target point.
    """
    x = grid.nodes
    half_trace = 0.5 * np.trace(T, axis1=1, axis2=2)
    T0 = T - half_trace[:, None, None] * _tangent_projector(x)
    c_trace = grid.analyze(half_trace) * factor
    iu = np.triu_indices(3)
    c_T0 = grid.analyze(np.stack([T0[:, a, b] for a, b in zip(*iu)])) * factor

    def sample(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        Pm = _tangent_projector(pts)
        tr = grid.evaluate(c_trace, pts)
        comps = grid.evaluate(c_T0, pts)
        S = np.empty((len(pts), 3, 3))
        for k, (a, b) in enumerate(zip(*iu)):
            S[:, a, b] = S[:, b, a] = comps[k]
        S = Pm @ S @ Pm
        S = S - 0.5 * np.trace(S, axis1=1, axis2=2)[:, None, None] * Pm
        return tr[:, None, None] * Pm + S

    return sample


def coefficient_sampler(F):
    """Evaluator of ``F`` (as a Cartesian tangential tensor) at arbitrary unit vectors."""
    if F.sampler is not None:
        return F.sampler
    return _cartesian_sampler(F.grid, F.field.in_frame("thetaphi").cartesian())


def mollify_coefficients(F, eps):
    """Heat-kernel smoothing of a coefficient field at angular scale ``eps``.

    The trace part is smoothed as a scalar and the traceless part through its
    Cartesian components (re-projected to the tangent plane), so constant
    multiples of the identity are left unchanged.  Eigenvalues dropping below
    ``lam_min(F) / 2`` are lifted back to that floor.  The result carries a
    band-limited ``sampler`` usable at arbitrary points.  The reported sup-norm
    distance is taken over the nodes and, when ``F`` has its own sampler, over a
    grid of twice the band limit as well.
    """
    if not eps > 0:
        raise DomainError(f"mollification scale must be positive, got {eps}")
    grid = F.grid
    x = grid.nodes
    sample = _cartesian_sampler(grid, F.field.in_frame("thetaphi").cartesian(), _heat(grid, eps))
    smoothed = SymMatrixField.from_cartesian(grid, sample(x))
    lam_floor = 0.5 * F.lam
    w, v = np.linalg.eigh(smoothed.matrices())
    lifted = int(np.sum(w < lam_floor))
    w = np.maximum(w, lam_floor)
    M = np.einsum("nik,nk,njk->nij", v, w, v)
    result = SymMatrixField.from_matrices(grid, M)
    dist = float(np.max(np.abs(np.linalg.eigvalsh((result - F.field.in_frame("thetaphi")).matrices()))))

    def sampler(points):
        S = sample(points)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        Pm = _tangent_projector(pts)
        w, v = np.linalg.eigh(S + np.einsum("na,nb->nab", pts, pts))
        # the normal direction carries eigenvalue 1 and is removed again below
        w = np.maximum(w, lam_floor)
        S = np.einsum("nik,nk,njk->nij", v, w, v)
        return Pm @ S @ Pm

    if F.sampler is not None:
        # F is known between the nodes: measure the distance on a finer check grid too
        from .sphere import build_grid

        check = build_grid(2 * grid.L).nodes
        diff = sampler(check) - F.sampler(check)
        dist = max(dist, float(np.max(np.abs(np.linalg.eigvalsh(diff)))))
    prov = {**F.provenance, "mollified": {"eps": float(eps), "distance": dist, "lifted_eigenvalues": lifted}}
    return CoefficientField(result, prov, sampler)


def mollification_distance(Fm):
    return Fm.provenance["mollified"]["distance"]


# ------------------------------------------------- homogeneous extension
def _unit_evaluator(u):
    if isinstance(u, SupportBody):
        u = u.u
    if isinstance(u, ScalarField):
        return u.evaluate
    if callable(u):
        return u
    raise TypeError("expected a ScalarField, SupportBody or callable on unit vectors")


def homogeneous_extension(u):
    """Return ``v(X) = |X| u(X / |X|)`` on R^3 minus the origin."""
    evaluate = _unit_evaluator(u)

    def v(X):
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        if np.any(r == 0):
            raise DomainError("the homogeneous extension is not defined at the origin")
        flat = (X / r[..., None]).reshape(-1, 3)
        return r * np.asarray(evaluate(flat)).reshape(r.shape)

    return v


def fd_hessian(v, X, step=1e-4):
    """Central-difference Hessians of ``v`` at points ``X`` (shape ``(P, 3, 3)``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = len(X)
    e = np.eye(3) * step
    stencils = []
    pairs = [(a, b) for a in range(3) for b in range(a, 3)]
    for a, b in pairs:
        for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            stencils.append(X + sa * e[a] + sb * e[b])
    vals = v(np.concatenate(stencils)).reshape(len(pairs), 4, P)
    H = np.empty((P, 3, 3))
    for k, (a, b) in enumerate(pairs):
        pp, pm, mp, mm = vals[k]
        H[:, a, b] = H[:, b, a] = (pp - pm - mp + mm) / (4.0 * step**2)
    return H


def _w_at(u, points):
    if isinstance(u, SupportBody):
        u = u.u
    _, hess, _, frame = derivatives_at(u, points, 2)
    val = u.evaluate(points)
    hess = hess.copy()
    hess[:, 0] += val
    hess[:, 2] += val
    return hess, frame


def radial_null_check(u, sample_points, step=1e-4, tol=1e-4):
    """Finite-difference check that ``nabla^2 v X = 0`` and that the other two
    eigenvalues of ``nabla^2 v`` are those of ``W_u(X/|X|) / |X|``."""
    X = np.atleast_2d(np.asarray(sample_points, dtype=float))
    r = np.linalg.norm(X, axis=-1)
    x = X / r[:, None]
    v = homogeneous_extension(u)
    H = fd_hessian(v, X, step)
    radial = np.linalg.norm(np.einsum("nab,nb->na", H, X), axis=-1)
    W, (e1, e2) = _w_at(u, x)
    E = np.stack([e1, e2], axis=1)
    tang = np.einsum("nia,nab,njb->nij", E, H, E)
    ev_v = np.linalg.eigvalsh(tang)
    Wm = np.stack([np.stack([W[:, 0], W[:, 1]], -1), np.stack([W[:, 1], W[:, 2]], -1)], -2)
    ev_w = np.linalg.eigvalsh(Wm) / r[:, None]
    full = np.linalg.eigvalsh(H)
    smallest = full[np.arange(len(X)), np.argmin(np.abs(full), axis=1)]
    radial_max = float(np.max(radial))
    eig_max = float(np.max(np.abs(ev_v - ev_w)))
    return {
        "radial_residual": radial,
        "radial_residual_max": radial_max,
        "null_eigenvalue_max": float(np.max(np.abs(smallest))),
        "eigenvalue_error": np.max(np.abs(ev_v - ev_w), axis=1),
        "eigenvalue_error_max": eig_max,
        "step": step,
        "pass": bool(radial_max <= tol and eig_max <= tol),
    }


def formulation_equivalence(u, A, points, step=1e-4):
    """Compare ``sum a^ij v_ij`` in R^3 with ``F^ij W_ij`` on the sphere, F^ij = <e_i, A e_j>.

    ``A`` maps unit vectors ``(P, 3)`` to 3x3 matrices ``(P, 3, 3)``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    Ax = np.asarray(A(x), dtype=float)
    H = fd_hessian(homogeneous_extension(u), x, step)
    ambient = np.einsum("nab,nab->n", Ax, H)
    W, (e1, e2) = _w_at(u, x)
    E = np.stack([e1, e2], axis=1)
    Fij = np.einsum("nia,nab,njb->nij", E, Ax, E)
    sphere = Fij[:, 0, 0] * W[:, 0] + (Fij[:, 0, 1] + Fij[:, 1, 0]) * W[:, 1] + Fij[:, 1, 1] * W[:, 2]
    return {"ambient": ambient, "sphere": sphere, "max_difference": float(np.max(np.abs(ambient - sphere)))}


def substitution_identity(v, F, min_x3=0.05):
    """Residual of ``F^ij((x3 v)_ij + x3 v delta_ij) = x3 (F^ij v_ij + b_k v_k)``.

    ``b_k = 2 F^ik (x3)_i / x3`` follows from ``(x3)_ij = -x3 delta_ij`` and
    the product rule.  Evaluated at nodes with ``x3 > min_x3``.
    """
    grid = v.grid
    x3 = grid.nodes[:, 2]
    Fe = F.field.in_frame("thetaphi")
    lhs = Fe.contract(spherical_hessian(ScalarField(grid, x3 * v.smooth_values)))
    grad_v, hess_v, _ = derivatives(v, 2)
    grad_x3, _, _ = derivatives(ScalarField.linear(grid, [0.0, 0.0, 1.0]), 2)
    Fm = Fe.matrices()
    mask = x3 > min_x3
    b = 2.0 * np.einsum("nik,ni->nk", Fm, grad_x3) / np.where(mask, x3, 1.0)[:, None]
    Fv = Fm[:, 0, 0] * hess_v[:, 0] + 2.0 * Fm[:, 0, 1] * hess_v[:, 1] + Fm[:, 1, 1] * hess_v[:, 2]
    rhs = x3 * (Fv + np.einsum("nk,nk->n", b, grad_v))
    resid = np.abs(lhs - rhs)[mask]
    return {"residual": resid, "max_residual": float(np.max(resid)), "nodes": int(mask.sum()), "drift": b[mask]}
