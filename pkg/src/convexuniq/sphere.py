"""Spectral calculus on the unit sphere.

Fields are sampled on a Gauss-Legendre (colatitude) x equiangular (longitude)
grid and represented by complex spherical-harmonic coefficients ``c[m, l]``
with ``m >= 0``::

    u(theta, phi) = sum_{l, m} Re(c[m, l] * exp(i m phi)) * P[l, m](theta)

where ``P[l, m]`` are the orthonormal associated Legendre functions
(``2 pi * int P^2 sin = 1``).  All derivatives are taken analytically from
the coefficients, so they are exact (to rounding) for band-limited fields.

Tensor components are reported in an orthonormal tangent frame.  The default
``"thetaphi"`` frame is ``(e_theta, e_phi)``; no Gauss-Legendre node sits on
a pole so it is defined at every node.  ``"tilted"`` is the same chart frame
taken with respect to a fixed rotated axis system; quantities requested in
that frame are recomputed from a rotated copy of the field rather than by
rotating components, which makes frame covariance a genuine check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import sph_legendre_p_all
from scipy.spatial.transform import Rotation

from .errors import GridError

MIN_L = 2
MAX_L = 96
FRAMES = ("thetaphi", "tilted")
SCHEME = "spectral"

# Fixed rotation defining the "tilted" chart frame.
TILT = Rotation.from_euler("zyz", [0.7, 1.1, 0.4]).as_matrix()


def _legendre_table(L, theta):
    """Return ``d^a/dtheta^a P[l, m](theta)`` for a = 0..3, indexed ``[a, m, l, k]``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    raw = sph_legendre_p_all(L, L, theta, diff_n=2)
    p = np.moveaxis(raw[:, :, : L + 1], 1, 2)
    s = np.sin(theta)
    c = np.cos(theta)
    ell = np.arange(L + 1)
    ll = (ell * (ell + 1.0))[None, :, None]
    mm = (ell**2.0)[:, None, None]
    # third derivative from the associated Legendre equation
    p3 = (
        -(c / s) * p[2]
        + p[1] / s**2
        - (ll - mm / s**2) * p[1]
        - 2.0 * mm * c / s**3 * p[0]
    )
    return np.concatenate([p, p3[None]], axis=0)


def cartesian_to_angles(points):
    points = np.asarray(points, dtype=float)
    z = np.clip(points[..., 2], -1.0, 1.0)
    return np.arccos(z), np.arctan2(points[..., 1], points[..., 0])


def chart_frame(theta, phi):
    """Unit vectors ``e_theta`` and ``e_phi`` of the spherical chart."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e1 = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e2 = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return e1, e2


class SphereGrid:
    """Gauss-Legendre x equiangular grid with band limit ``L``.

    Quadrature with ``nlat >= L + 1`` latitudes and ``nlon >= 2L + 2``
    longitudes integrates every field of degree ``<= 2 * nlat - 1`` exactly,
    in particular products of two degree-``L`` fields.
    """

    kind = "gauss-legendre"

    def __init__(self, L, nlat=None, nlon=None):
        if not isinstance(L, (int, np.integer)) or not MIN_L <= L <= MAX_L:
            raise GridError(f"band limit L must be an integer in [{MIN_L}, {MAX_L}], got {L!r}")
        L = int(L)
        nlat = L + 1 if nlat is None else int(nlat)
        nlon = 2 * L + 2 if nlon is None else int(nlon)
        if nlat < L + 1 or nlon < 2 * L + 2:
            raise GridError(f"grid {nlat}x{nlon} too coarse for band limit {L}")
        self.L, self.nlat, self.nlon = L, nlat, nlon
        x, w = np.polynomial.legendre.leggauss(nlat)
        x, w = x[::-1], w[::-1]
        self.theta = np.arccos(x)
        self.phi = 2.0 * np.pi * np.arange(nlon) / nlon
        self.gl_weights = w
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        self.node_theta = th.ravel()
        self.node_phi = ph.ravel()
        st = np.sin(self.node_theta)
        self.nodes = np.stack(
            [st * np.cos(self.node_phi), st * np.sin(self.node_phi), np.cos(self.node_theta)], axis=-1
        )
        self.weights = np.repeat(w, nlon) * (2.0 * np.pi / nlon)
        self._table = _legendre_table(L, self.theta)
        self._frames = {"thetaphi": chart_frame(self.node_theta, self.node_phi)}
        for arr in (self.theta, self.phi, self.nodes, self.weights, self.node_theta, self.node_phi):
            arr.flags.writeable = False

    @property
    def size(self):
        return self.nlat * self.nlon

    @property
    def ncoef(self):
        return (self.L + 1) ** 2

    @property
    def spacing(self):
        """Largest angular spacing between neighbouring grid lines (radians)."""
        return max(float(np.max(np.diff(np.concatenate([[0.0], self.theta, [np.pi]])))), 2 * np.pi / self.nlon)

    @property
    def exact_degree(self):
        return 2 * self.nlat - 1

    def __repr__(self):
        return f"SphereGrid(L={self.L}, nlat={self.nlat}, nlon={self.nlon})"

    def key(self):
        return (self.kind, self.L, self.nlat, self.nlon)

    def same_as(self, other):
        return other is self or (isinstance(other, SphereGrid) and other.key() == self.key())

    def check_same(self, *others):
        for other in others:
            if not self.same_as(other):
                raise GridError(f"grid mismatch: {self!r} vs {other!r}")

    # ------------------------------------------------------------------ frames
    def frame(self, name="thetaphi"):
        if name not in FRAMES:
            raise GridError(f"unknown frame convention {name!r}; choose from {FRAMES}")
        if name not in self._frames:
            rotated = self.nodes @ TILT.T
            th, ph = cartesian_to_angles(rotated)
            if np.min(np.sin(th)) < 1e-8:
                raise GridError("a grid node sits on a pole of the tilted chart")
            e1, e2 = chart_frame(th, ph)
            self._frames[name] = (e1 @ TILT, e2 @ TILT)
        return self._frames[name]

    def frame_rotation(self, source, target):
        """Per-node 2x2 matrices R with ``comps_target = R @ comps_source``."""
        s1, s2 = self.frame(source)
        t1, t2 = self.frame(target)
        R = np.empty((self.size, 2, 2))
        for i, t in enumerate((t1, t2)):
            for j, s in enumerate((s1, s2)):
                R[:, i, j] = np.einsum("na,na->n", t, s)
        return R

    # -------------------------------------------------------------- transforms
    def analyze(self, values):
        """Quadrature projection of nodal values onto coefficients ``c[..., m, l]``."""
        values = np.asarray(values, dtype=float)
        lead = values.shape[:-1]
        grid_vals = values.reshape(lead + (self.nlat, self.nlon))
        F = np.fft.rfft(grid_vals, axis=-1)[..., : self.L + 1] * (2.0 / self.nlon)
        F[..., 0] *= 0.5
        F = F * self.gl_weights[:, None]
        return 2.0 * np.pi * np.einsum("...jm,mlj->...ml", F, self._table[0])

    def synthesize(self, coeffs, dtheta=0, dphi=0):
        """Values of ``d^dtheta d^dphi u`` at the grid nodes."""
        coeffs = np.asarray(coeffs)
        G = np.einsum("...ml,mlj->...jm", coeffs, self._table[dtheta])
        if dphi:
            G = G * (1j * np.arange(self.L + 1)) ** dphi
        X = np.zeros(G.shape[:-1] + (self.nlon // 2 + 1,), dtype=complex)
        X[..., : self.L + 1] = G * (self.nlon / 2.0)
        X[..., 0] = G[..., 0] * self.nlon
        out = np.fft.irfft(X, n=self.nlon, axis=-1)
        return out.reshape(G.shape[:-2] + (self.size,))

    def evaluate(self, coeffs, points, dtheta=0, dphi=0, chunk=1024):
        """Values of ``d^dtheta d^dphi u`` at arbitrary unit vectors."""
        theta, phi = cartesian_to_angles(points)
        if dtheta + dphi and np.min(np.sin(theta)) < 1e-10:
            raise GridError("derivatives requested at a chart pole")
        coeffs = np.asarray(coeffs)
        th, ph = np.ravel(theta), np.ravel(phi)
        m = np.arange(self.L + 1)
        out = np.empty(coeffs.shape[:-2] + th.shape)
        for start in range(0, len(th), chunk):
            sl = slice(start, start + chunk)
            table = _legendre_table(self.L, th[sl])[dtheta]
            G = np.einsum("...ml,mlp->...pm", coeffs, table)
            if dphi:
                G = G * (1j * m) ** dphi
            phase = np.exp(1j * np.outer(ph[sl], m))
            out[..., sl] = np.real(np.sum(G * phase, axis=-1))
        return out.reshape(coeffs.shape[:-2] + np.shape(theta))

    # ------------------------------------------------------- real coefficients
    @cached_property
    def _real_index(self):
        ls, ms = [], []
        for l in range(self.L + 1):
            for m in range(-l, l + 1):
                ls.append(l)
                ms.append(m)
        return np.array(ls), np.array(ms)

    def degree_of_index(self):
        return self._real_index[0].copy()

    def to_real(self, coeffs):
        """Map complex ``c[m, l]`` to coefficients of the orthonormal real basis."""
        coeffs = np.asarray(coeffs)
        ls, ms = self._real_index
        am = np.abs(ms)
        c = coeffs[..., am, ls]
        scale = np.where(ms == 0, 1.0, 1.0 / np.sqrt(2.0))
        return np.where(ms >= 0, c.real, -c.imag) * scale

    def from_real(self, a):
        a = np.asarray(a, dtype=float)
        ls, ms = self._real_index
        out = np.zeros(a.shape[:-1] + (self.L + 1, self.L + 1), dtype=complex)
        pos = ms >= 0
        scale = np.where(ms[pos] == 0, 1.0, np.sqrt(2.0))
        out[..., ms[pos], ls[pos]] += a[..., pos] * scale
        neg = ~pos
        out[..., -ms[neg], ls[neg]] += -1j * np.sqrt(2.0) * a[..., neg]
        return out

    def real_harmonic(self, l, m):
        """Nodal values of the orthonormal real harmonic ``Y_lm``."""
        if not 0 <= abs(m) <= l <= self.L:
            raise GridError(f"harmonic (l={l}, m={m}) outside band limit {self.L}")
        a = np.zeros(self.ncoef)
        a[l * l + l + m] = 1.0
        return self.synthesize(self.from_real(a))

    def integrate(self, values):
        return np.asarray(values, dtype=float) @ self.weights


@lru_cache(maxsize=16)
def _cached_grid(L, nlat, nlon):
    return SphereGrid(L, nlat, nlon)


def build_grid(L, nlat=None, nlon=None):
    """Gauss-Legendre grid for band limit ``L`` (cached; grids are immutable)."""
    if not isinstance(L, (int, np.integer)) or not MIN_L <= L <= MAX_L:
        raise GridError(f"band limit L must be an integer in [{MIN_L}, {MAX_L}], got {L!r}")
    return _cached_grid(int(L), nlat, nlon)


# ---------------------------------------------------------------------- fields
@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal samples of a function on the sphere plus its spectral coefficients.

    Derivatives always use the coefficient representation; ``alias_error``
    measures how far the nodal samples sit from it (zero for band-limited
    fields).
    """

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape != (self.grid.size,):
            raise GridError(f"expected {self.grid.size} nodal values, got {vals.size}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.nodes))

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        field = cls(grid, grid.synthesize(coeffs))
        field.__dict__["coeffs"] = np.asarray(coeffs)
        return field

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.size, float(value)))

    @classmethod
    def linear(cls, grid, a):
        return cls(grid, grid.nodes @ np.asarray(a, dtype=float))

    @cached_property
    def coeffs(self):
        return self.grid.analyze(self.values)

    @cached_property
    def smooth_values(self):
        return self.grid.synthesize(self.coeffs)

    @property
    def alias_error(self):
        return float(np.max(np.abs(self.smooth_values - self.values)))

    def evaluate(self, points):
        return self.grid.evaluate(self.coeffs, points)

    def _other(self, other):
        if isinstance(other, ScalarField):
            self.grid.check_same(other.grid)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


def _rotate_vectors(comps, R):
    return np.einsum("nij,nj->ni", R, comps)


@dataclass(frozen=True, eq=False)
class TangentVectorField:
    """Per-node tangent vectors as components along the frame ``(e1, e2)``."""

    grid: SphereGrid
    comps: np.ndarray
    frame: str = "thetaphi"

    def norm(self):
        return np.hypot(self.comps[:, 0], self.comps[:, 1])

    def cartesian(self):
        e1, e2 = self.grid.frame(self.frame)
        return self.comps[:, :1] * e1 + self.comps[:, 1:] * e2

    def in_frame(self, frame):
        if frame == self.frame:
            return self
        R = self.grid.frame_rotation(self.frame, frame)
        return TangentVectorField(self.grid, _rotate_vectors(self.comps, R), frame)


@dataclass(frozen=True, eq=False)
class SymMatrixField:
    """Per-node symmetric 2x2 matrices stored as ``entries[:, (m11, m12, m22)]``."""

    grid: SphereGrid
    entries: np.ndarray
    frame: str = "thetaphi"

    def __post_init__(self):
        ent = np.array(self.entries, dtype=float)
        if ent.shape != (self.grid.size, 3):
            raise GridError(f"expected entries of shape ({self.grid.size}, 3), got {ent.shape}")
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)

    @classmethod
    def from_matrices(cls, grid, M, frame="thetaphi"):
        M = np.broadcast_to(np.asarray(M, dtype=float), (grid.size, 2, 2))
        return cls(grid, np.stack([M[:, 0, 0], 0.5 * (M[:, 0, 1] + M[:, 1, 0]), M[:, 1, 1]], axis=-1), frame)

    @classmethod
    def from_cartesian(cls, grid, T, frame="thetaphi"):
        e1, e2 = grid.frame(frame)
        T = np.broadcast_to(np.asarray(T, dtype=float), (grid.size, 3, 3))
        m11 = np.einsum("na,nab,nb->n", e1, T, e1)
        m12 = 0.5 * (np.einsum("na,nab,nb->n", e1, T, e2) + np.einsum("na,nab,nb->n", e2, T, e1))
        m22 = np.einsum("na,nab,nb->n", e2, T, e2)
        return cls(grid, np.stack([m11, m12, m22], axis=-1), frame)

    @property
    def m11(self):
        return self.entries[:, 0]

    @property
    def m12(self):
        return self.entries[:, 1]

    @property
    def m22(self):
        return self.entries[:, 2]

    def matrices(self):
        e = self.entries
        return np.stack([np.stack([e[:, 0], e[:, 1]], -1), np.stack([e[:, 1], e[:, 2]], -1)], -2)

    def eigvalsh(self):
        """Ascending eigenvalues per node, shape ``(N, 2)``."""
        return np.linalg.eigvalsh(self.matrices())

    def trace(self):
        return self.m11 + self.m22

    def det(self):
        return self.m11 * self.m22 - self.m12**2

    def frob2(self):
        return self.m11**2 + 2.0 * self.m12**2 + self.m22**2

    def contract(self, other):
        """Pointwise ``sum_ij A^ij B_ij``."""
        self.grid.check_same(other.grid)
        if other.frame != self.frame:
            other = other.in_frame(self.frame)
        a, b = self.entries, other.entries
        return a[:, 0] * b[:, 0] + 2.0 * a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]

    def cartesian(self):
        e1, e2 = self.grid.frame(self.frame)
        return (
            self.m11[:, None, None] * np.einsum("na,nb->nab", e1, e1)
            + self.m12[:, None, None] * (np.einsum("na,nb->nab", e1, e2) + np.einsum("na,nb->nab", e2, e1))
            + self.m22[:, None, None] * np.einsum("na,nb->nab", e2, e2)
        )

    def in_frame(self, frame):
        if frame == self.frame:
            return self
        R = self.grid.frame_rotation(self.frame, frame)
        M = np.einsum("nij,njk,nlk->nil", R, self.matrices(), R)
        return SymMatrixField.from_matrices(self.grid, M, frame)

    def _check(self, other):
        self.grid.check_same(other.grid)
        return other.in_frame(self.frame).entries

    def __add__(self, other):
        return SymMatrixField(self.grid, self.entries + self._check(other), self.frame)

    def __sub__(self, other):
        return SymMatrixField(self.grid, self.entries - self._check(other), self.frame)

    def __mul__(self, scalar):
        scalar = np.asarray(scalar, dtype=float)
        if scalar.ndim == 1:
            scalar = scalar[:, None]
        return SymMatrixField(self.grid, self.entries * scalar, self.frame)

    __rmul__ = __mul__

    def __neg__(self):
        return SymMatrixField(self.grid, -self.entries, self.frame)

    def add_identity(self, scale):
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (self.grid.size,))
        e = self.entries.copy()
        e[:, 0] += scale
        e[:, 2] += scale
        return SymMatrixField(self.grid, e, self.frame)


# ---------------------------------------------------------------- derivatives
def frame_derivatives(p, theta, order):
    """Covariant derivatives in the chart frame from coordinate partials.

    ``p[(a, b)]`` holds ``d^a/dtheta^a d^b/dphi^b u``.  Returns ``(grad, hess,
    third)`` with grad ``(..., 2)``, hess entries ``(..., 3)`` and third
    ``(..., 2, 2, 2)`` where ``third[..., i, j, k] = (nabla_k nabla^2 u)_ij``.
    The chart connection is ``nabla_{e2} e1 = cot(theta) e2``,
    ``nabla_{e2} e2 = -cot(theta) e1`` and ``nabla_{e1} = d/dtheta``.
    """
    s, c = np.sin(theta), np.cos(theta)
    t = c / s
    grad = np.stack([p[1, 0], p[0, 1] / s], axis=-1)
    if order < 2:
        return grad, None, None
    h11 = p[2, 0]
    h12 = p[1, 1] / s - c * p[0, 1] / s**2
    h22 = p[0, 2] / s**2 + t * p[1, 0]
    hess = np.stack([h11, h12, h22], axis=-1)
    if order < 3:
        return grad, hess, None
    dth_h12 = p[2, 1] / s - 2.0 * c * p[1, 1] / s**2 + (s**2 + 2.0 * c**2) * p[0, 1] / s**3
    dth_h22 = p[1, 2] / s**2 - 2.0 * c * p[0, 2] / s**3 + t * p[2, 0] - p[1, 0] / s**2
    dph_h12 = p[1, 2] / s - c * p[0, 2] / s**2
    dph_h22 = p[0, 3] / s**2 + t * p[1, 1]
    third = np.empty(np.shape(h11) + (2, 2, 2))
    third[..., 0, 0, 0] = p[3, 0]
    third[..., 0, 1, 0] = third[..., 1, 0, 0] = dth_h12
    third[..., 1, 1, 0] = dth_h22
    third[..., 0, 0, 1] = p[2, 1] / s - 2.0 * t * h12
    third[..., 0, 1, 1] = third[..., 1, 0, 1] = dph_h12 / s + t * (h11 - h22)
    third[..., 1, 1, 1] = dph_h22 / s + 2.0 * t * h12
    return grad, hess, third


def _partials(grid, coeffs, order, points=None):
    out = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            if points is None:
                out[a, b] = grid.synthesize(coeffs, a, b)
            else:
                out[a, b] = grid.evaluate(coeffs, points, a, b)
    return out


def _rotated_coeffs(u):
    # coefficients of y -> u(TILT^T y), cached on the field
    c_rot = u.__dict__.get("_tilted_coeffs")
    if c_rot is None:
        grid = u.grid
        c_rot = grid.analyze(grid.evaluate(u.coeffs, grid.nodes @ TILT))
        u.__dict__["_tilted_coeffs"] = c_rot
    return c_rot


def _tilted_derivatives(u, order, mask=None):
    grid = u.grid
    pts = grid.nodes @ TILT.T
    if mask is not None:
        pts = pts[mask]
    theta, _ = cartesian_to_angles(pts)
    return frame_derivatives(_partials(grid, _rotated_coeffs(u), order, pts), theta, order)


def derivatives(u, order=2, frame="thetaphi"):
    """Gradient, Hessian entries and third derivatives of ``u`` up to ``order``."""
    if frame == "thetaphi":
        key = f"_derivs_{order}"
        cached = u.__dict__.get(key)
        if cached is None:
            cached = frame_derivatives(_partials(u.grid, u.coeffs, order), u.grid.node_theta, order)
            u.__dict__[key] = cached
        return cached
    if frame == "tilted":
        return _tilted_derivatives(u, order)
    raise GridError(f"unknown frame convention {frame!r}; choose from {FRAMES}")


def derivatives_at(u, points, order=2):
    """Chart-frame derivatives of ``u`` at arbitrary unit vectors ``points``."""
    theta, phi = cartesian_to_angles(points)
    grad, hess, third = frame_derivatives(_partials(u.grid, u.coeffs, order, points), theta, order)
    e1, e2 = chart_frame(theta, phi)
    return grad, hess, third, (e1, e2)


def covariant_gradient(u, frame="thetaphi"):
    """Components ``u_i`` of the surface gradient."""
    grad, _, _ = derivatives(u, 1 if frame == "tilted" else 2, frame)
    return TangentVectorField(u.grid, grad, frame)


def covariant_hessian(u, frame="thetaphi"):
    """Covariant Hessian ``u_ij`` (symmetric by construction)."""
    _, hess, _ = derivatives(u, 2, frame)
    return SymMatrixField(u.grid, hess, frame)


def covariant_third(u):
    """Third covariant derivatives ``u_{ij;k}`` in the chart frame, shape ``(N, 2, 2, 2)``."""
    _, _, third = derivatives(u, 3)
    return third


def laplace_beltrami(u):
    """Spectral Laplace-Beltrami operator (multiplies degree-l coefficients by -l(l+1))."""
    ell = np.arange(u.grid.L + 1)
    return ScalarField.from_coeffs(u.grid, u.coeffs * (-ell * (ell + 1.0))[None, :])


def integrate(w):
    """Quadrature of a scalar field (or an array of nodal values) over the sphere."""
    if isinstance(w, ScalarField):
        return float(w.grid.integrate(w.values))
    raise TypeError("integrate expects a ScalarField")


def random_bandlimited(grid, degree, rng, scale=1.0):
    """Random real field with independent N(0, scale^2) coefficients up to ``degree``."""
    if degree > grid.L:
        raise GridError(f"degree {degree} exceeds band limit {grid.L}")
    a = np.zeros(grid.ncoef)
    n = (degree + 1) ** 2
    a[:n] = rng.standard_normal(n) * scale
    return ScalarField.from_coeffs(grid, grid.from_real(a))
