"""Dirichlet problem for ``F^ij (u_ij + u delta_ij) = 0`` on a geodesic cap.

The cap is rotated so its center is the north pole.  Writing ``u = x3 v``
removes the zeroth-order term: since ``(x3)_ij = -x3 delta_ij``,

    F^ij((x3 v)_ij + x3 v delta_ij) = x3 (F^ij v_ij + b_k v_k),
    b_k = 2 F^ik (x3)_i / x3 = -2 tan(r) F^1k   (polar frame, r = colatitude),

and the drift equation for ``v`` has a maximum principle, hence a unique
solution.  It is discretized by Chebyshev collocation in ``r`` folded through
the pole (no node at the pole) times Fourier collocation in the angle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation

from .errors import DomainError, SolverError
from .elliptic import coefficient_sampler
from .sphere import ScalarField, cartesian_to_angles, chart_frame

EQUATOR_MARGIN = 1e-9


def cheb(N):
    """Chebyshev points ``cos(j pi / N)`` and the differentiation matrix."""
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.where((j == 0) | (j == N), 2.0, 1.0) * (-1.0) ** j
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def fourier_matrices(M):
    """First and second periodic differentiation matrices on ``M`` (even) equispaced points."""
    if M % 2:
        raise DomainError("the angular point count must be even")
    h = 2 * np.pi / M
    k = np.arange(1, M)
    col1 = np.concatenate([[0.0], 0.5 * (-1.0) ** k / np.tan(k * h / 2)])
    col2 = np.concatenate([[-np.pi**2 / (3 * h**2) - 1 / 6], -0.5 * (-1.0) ** k / np.sin(k * h / 2) ** 2])
    D1 = scipy.linalg.toeplitz(col1, -col1)
    D2 = scipy.linalg.toeplitz(col2)
    return D1, D2


def _as_evaluator(g):
    if isinstance(g, ScalarField):
        return g.evaluate
    if callable(g):
        return g
    raise TypeError("boundary data must be a ScalarField or a callable on unit vectors")


@dataclass(frozen=True, eq=False)
class CapProblem:
    """Geodesic cap ``{x : angle(x, center) <= radius}`` with Dirichlet data.

    ``boundary`` is evaluated at unit vectors of the cap boundary (original
    coordinates); ``coefficients`` is a :class:`CoefficientField`, sampled off
    the grid through its ``sampler`` (mollified fields) or by band-limited
    interpolation.  ``nr`` radial points between pole and rim, ``nphi``
    angular points.
    """

    center: np.ndarray
    radius: float
    boundary: object
    coefficients: object
    nr: int = 16
    nphi: int = 32

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,) or not np.linalg.norm(c) > 0:
            raise DomainError("cap center must be a nonzero 3-vector")
        object.__setattr__(self, "center", c / np.linalg.norm(c))
        if not 0 < self.radius < np.pi / 2 - EQUATOR_MARGIN:
            raise DomainError(
                f"cap radius {self.radius} must lie in (0, pi/2): the cap has to sit strictly inside "
                "the open hemisphere around its center so that x3 > 0 on its closure"
            )
        if self.nr < 3 or self.nphi < 4:
            raise DomainError("cap resolution too small")

    @property
    def rotation(self):
        """Rotation taking the cap center to the north pole."""
        rot, _ = Rotation.align_vectors([[0.0, 0.0, 1.0]], [self.center])
        return rot


@dataclass(frozen=True, eq=False)
class CapSolution:
    problem: CapProblem
    r: np.ndarray
    phi: np.ndarray
    v: np.ndarray  # (nr, nphi), values of u / x3 at collocation nodes
    report: dict = field(default_factory=dict)

    @property
    def u(self):
        return np.cos(self.r)[:, None] * self.v

    def _full_rows(self):
        # rows of the unfolded Chebyshev grid on [-R, R]
        half = self.problem.nphi // 2
        mirror = np.roll(self.v, -half, axis=1)[::-1]
        return np.concatenate([self.v, mirror], axis=0)

    def evaluate(self, points):
        """Solution ``u`` at unit vectors inside the cap (original coordinates)."""
        p = self.problem
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        y = p.rotation.apply(pts)
        r, phi = cartesian_to_angles(y)
        if np.any(r > p.radius * (1 + 1e-12)):
            raise DomainError("evaluation point outside the cap")
        rows = self._full_rows()  # (N+1, M)
        M = p.nphi
        coef = np.fft.fft(rows, axis=1) / M
        k = np.fft.fftfreq(M, 1.0 / M)
        k[M // 2] = 0.0  # Nyquist mode handled by the cosine term below
        phase = np.exp(1j * np.outer(phi, k))
        vals = np.real(phase @ coef.T)
        vals += np.real(np.outer(np.cos(M // 2 * phi), coef[:, M // 2]))
        N = 2 * p.nr - 1
        j = np.arange(N + 1)
        xj = np.cos(np.pi * j / N)
        w = (-1.0) ** j * np.where((j == 0) | (j == N), 0.5, 1.0)
        t = r / p.radius
        diff = t[:, None] - xj[None, :]
        hit = np.isclose(diff, 0.0, atol=1e-15)
        diff[hit] = 1.0
        q = w / diff
        out = np.sum(q * vals, axis=1) / np.sum(q, axis=1)
        rows_hit, cols_hit = np.nonzero(hit)
        out[rows_hit] = vals[rows_hit, cols_hit]
        return np.cos(r) * out

    def on_grid(self, grid):
        """``(mask, values)`` for the global grid nodes inside the cap."""
        ang = np.arccos(np.clip(grid.nodes @ self.problem.center, -1.0, 1.0))
        mask = ang <= self.problem.radius
        return mask, self.evaluate(grid.nodes[mask])


def _drift_operator(F, r, s, c):
    """Rows of ``F^ij v_ij + b_k v_k`` in terms of the elementary derivative matrices."""
    t = s / c
    b1 = -2.0 * t * F[:, 0, 0]
    b2 = -2.0 * t * F[:, 0, 1]
    return {
        "rr": F[:, 0, 0],
        "rp": 2.0 * F[:, 0, 1] / s,
        "p": -2.0 * F[:, 0, 1] * c / s**2 + b2 / s,
        "pp": F[:, 1, 1] / s**2,
        "r": F[:, 1, 1] * c / s + b1,
    }


def solve_cap_dirichlet(p: CapProblem) -> CapSolution:
    nr, M = p.nr, p.nphi
    N = 2 * nr - 1
    x, D = cheb(N)
    D = D / p.radius
    D2 = D @ D
    perm = np.roll(np.eye(M), M // 2, axis=1)  # v(.., phi + pi)

    def folded(A):
        return np.kron(A[:nr, :nr], np.eye(M)) + np.kron(A[:nr, nr:][:, ::-1], perm)

    Dr, Drr = folded(D), folded(D2)
    F1, F2 = fourier_matrices(M)
    I_r = np.eye(nr)
    Dp, Dpp = np.kron(I_r, F1), np.kron(I_r, F2)
    Drp = Dr @ Dp

    r = p.radius * x[:nr]
    phi = 2 * np.pi * np.arange(M) / M
    R, P = np.meshgrid(r, phi, indexing="ij")
    R, P = R.ravel(), P.ravel()
    s, c = np.sin(R), np.cos(R)
    e1, e2 = chart_frame(R, P)
    y = np.stack([s * np.cos(P), s * np.sin(P), c], -1)
    rot = p.rotation
    X = rot.inv().apply(y)  # original coordinates
    E = np.stack([rot.inv().apply(e1), rot.inv().apply(e2)], axis=1)
    T = coefficient_sampler(p.coefficients)(X)
    F = np.einsum("nia,nab,njb->nij", E, T, E)
    eig = np.linalg.eigvalsh(F)[:, 0]
    if not np.min(eig) > 0:
        raise DomainError(f"coefficients are not positive definite inside the cap (min eigenvalue {np.min(eig):.3e})")

    k = _drift_operator(F, R, s, c)
    A = (k["rr"][:, None] * Drr + k["rp"][:, None] * Drp + k["p"][:, None] * Dp
         + k["pp"][:, None] * Dpp + k["r"][:, None] * Dr)
    rhs = np.zeros(nr * M)
    bnd = np.arange(M)  # i = 0 is the rim r = R
    g = np.asarray(_as_evaluator(p.boundary)(X[bnd]), dtype=float)
    A_int = A.copy()
    A[bnd] = 0.0
    A[bnd, bnd] = 1.0
    rhs[bnd] = g / np.cos(p.radius)
    try:
        lu = scipy.linalg.lu_factor(A, check_finite=True)
        v = scipy.linalg.lu_solve(lu, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"cap collocation solve failed: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise SolverError("cap collocation solve produced non-finite values")
    interior = np.arange(M, nr * M)
    pde = A_int[interior] @ v
    report = {
        "pde_residual_max": float(np.max(np.abs(pde))),
        "boundary_residual_max": float(np.max(np.abs(c[bnd] * v[bnd] - g))),
        "condition_estimate": float(np.linalg.cond(A, 1)),
        "lam_min": float(np.min(eig)),
        "nr": nr,
        "nphi": M,
        "radius": float(p.radius),
        "scheme": "folded Chebyshev x Fourier collocation, u = x3 v",
    }
    return CapSolution(p, r, phi, v.reshape(nr, M), report)
