"""Structured meshes.

Four mesh families are provided:

* :class:`IntervalMesh` -- uniform vertex grid on ``[a, b]`` with dual-cell
  volumes (trapezoid weights), endpoints included.
* :class:`TensorMesh` -- the two-dimensional analogue on a rectangle.
* :class:`PolarMesh` -- mapped polar grid on a disk or ellipse, cell-centred
  in ``(r, theta)`` with exact cell volumes.
* :class:`CartesianMesh` -- cell-centred Cartesian grid over the bounding box
  of a disk or ellipse; cell volumes are area fractions, zero outside.  Used by
  the separable Sinkhorn kernels.

Every mesh exposes ``points`` (N, d), ``volumes`` (N,), a ``boundary``
face list, ``gradient``/``jacobian``/``divergence`` operators and
``interpolate``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .errors import DimensionError, RangeError


@dataclass(frozen=True)
class BoundaryFaces:
    """Boundary faces: a point on the boundary, its unit outer normal, the
    face measure and the index of the adjacent node."""

    points: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    cells: np.ndarray

    def __len__(self):
        return len(self.areas)


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


class Mesh:
    """Common interface.  Subclasses fill in the geometry."""

    dim: int
    points: np.ndarray
    volumes: np.ndarray
    boundary: BoundaryFaces
    shape: tuple
    h: float

    @property
    def n(self):
        return len(self.volumes)

    @property
    def active(self):
        """Nodes carrying positive volume."""
        return self.volumes > 0

    def same_as(self, other):
        if self is other:
            return True
        return (type(self) is type(other) and self.shape == other.shape
                and np.array_equal(self.points, other.points))

    def _as_grid(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.n:
            raise DimensionError(f"field has {u.shape[0]} nodes, mesh has {self.n}")
        return u.reshape(self.shape + u.shape[1:])

    def jacobian(self, v):
        """``J[:, i, j] = d v_i / d x_j`` for a vector field ``v`` of shape (N, d)."""
        v = np.asarray(v, dtype=float)
        return np.stack([self.gradient(v[:, i]) for i in range(v.shape[1])], axis=1)

    def hessian(self, u):
        """Finite-difference Hessian, symmetrised."""
        H = self.jacobian(self.gradient(u))
        return 0.5 * (H + np.swapaxes(H, 1, 2))

    def divergence(self, v):
        v = np.asarray(v, dtype=float)
        return sum(self.gradient(v[:, i])[:, i] for i in range(self.dim))


class IntervalMesh(Mesh):
    """Uniform vertex grid with ``n`` nodes on ``[a, b]``."""

    dim = 1

    def __init__(self, a, b, n):
        if not b > a:
            raise RangeError(f"interval endpoints must satisfy a < b, got {a}, {b}")
        if n < 3:
            raise DimensionError("an interval mesh needs at least 3 nodes")
        self.a, self.b = float(a), float(b)
        self.x = _readonly(np.linspace(a, b, n))
        self.h = (self.b - self.a) / (n - 1)
        self.shape = (n,)
        self.points = _readonly(self.x[:, None])
        self.volumes = _readonly(_trapezoid_weights(n, self.h))
        self.boundary = BoundaryFaces(
            points=_readonly([[self.a], [self.b]]),
            normals=_readonly([[-1.0], [1.0]]),
            areas=_readonly([1.0, 1.0]),
            cells=np.array([0, n - 1]),
        )

    def gradient(self, u):
        u = self._as_grid(u)
        return np.gradient(u, self.x, axis=0, edge_order=2)[:, None, ...]

    def interpolate(self, u, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return np.interp(pts, self.x, u)
        return np.stack([np.interp(pts, self.x, u[:, k]) for k in range(u.shape[1])], axis=1)

    def boundary_values(self, u):
        return np.asarray(u)[self.boundary.cells]


class TensorMesh(Mesh):
    """Vertex grid on the rectangle ``[lo, hi]`` with ``shape`` nodes."""

    dim = 2

    def __init__(self, lo, hi, shape):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if np.any(hi <= lo):
            raise RangeError("rectangle corners must satisfy lo < hi")
        n1, n2 = map(int, shape)
        if min(n1, n2) < 3:
            raise DimensionError("a tensor mesh needs at least 3 nodes per axis")
        self.lo, self.hi = lo, hi
        self.axes = (np.linspace(lo[0], hi[0], n1), np.linspace(lo[1], hi[1], n2))
        self.spacing = ((hi[0] - lo[0]) / (n1 - 1), (hi[1] - lo[1]) / (n2 - 1))
        self.h = max(self.spacing)
        self.shape = (n1, n2)
        X, Y = np.meshgrid(*self.axes, indexing="ij")
        self.points = _readonly(np.column_stack([X.ravel(), Y.ravel()]))
        self.w = (_trapezoid_weights(n1, self.spacing[0]), _trapezoid_weights(n2, self.spacing[1]))
        self.volumes = _readonly(np.outer(*self.w).ravel())
        idx = np.arange(n1 * n2).reshape(n1, n2)
        pts, nrm, area, cell = [], [], [], []
        for side, (cells, normal, lengths) in enumerate([
            (idx[0, :], (-1.0, 0.0), self.w[1]),
            (idx[-1, :], (1.0, 0.0), self.w[1]),
            (idx[:, 0], (0.0, -1.0), self.w[0]),
            (idx[:, -1], (0.0, 1.0), self.w[0]),
        ]):
            pts.append(self.points[cells])
            nrm.append(np.tile(normal, (len(cells), 1)))
            area.append(lengths)
            cell.append(cells)
        self.boundary = BoundaryFaces(_readonly(np.vstack(pts)), _readonly(np.vstack(nrm)),
                                      _readonly(np.concatenate(area)), np.concatenate(cell))

    def gradient(self, u):
        g = self._as_grid(u)
        d0 = np.gradient(g, self.axes[0], axis=0, edge_order=2)
        d1 = np.gradient(g, self.axes[1], axis=1, edge_order=2)
        return np.stack([d0, d1], axis=2).reshape((self.n, 2) + g.shape[2:])

    def interpolate(self, u, pts):
        pts = np.asarray(pts, float).reshape(-1, 2)
        g = self._as_grid(u)
        f = RegularGridInterpolator(self.axes, g, bounds_error=False, fill_value=None)
        return f(pts)

    def boundary_values(self, u):
        return np.asarray(u)[self.boundary.cells]

    def fv_layout(self):
        n1, n2 = self.shape
        idx = np.arange(self.n).reshape(n1, n2)
        h1, h2 = self.spacing
        faces = [
            (idx[:-1, :].ravel(), idx[1:, :].ravel(), (h1 * np.tile(self.w[1], n1 - 1)), 0),
            (idx[:, :-1].ravel(), idx[:, 1:].ravel(), (h2 * np.repeat(self.w[0], n2 - 1)), 1),
        ]
        D0 = sp.kron(_fd_matrix(n1, h1), sp.identity(n2), format="csr")
        D1 = sp.kron(sp.identity(n1), _fd_matrix(n2, h2), format="csr")

        def metric(A):
            return np.asarray(A, float)

        return dict(faces=faces, centered=(D0, D1), spacing=(h1, h2), metric=metric)


def _fd_matrix(n, h, periodic=False):
    """Centred first-difference matrix; second-order one-sided at the ends."""
    D = sp.lil_matrix((n, n))
    for i in range(n):
        if periodic:
            D[i, (i + 1) % n] += 1 / (2 * h)
            D[i, (i - 1) % n] -= 1 / (2 * h)
        elif i == 0:
            D[i, 0], D[i, 1], D[i, 2] = -3 / (2 * h), 4 / (2 * h), -1 / (2 * h)
        elif i == n - 1:
            D[i, n - 1], D[i, n - 2], D[i, n - 3] = 3 / (2 * h), -4 / (2 * h), 1 / (2 * h)
        else:
            D[i, i + 1], D[i, i - 1] = 1 / (2 * h), -1 / (2 * h)
    return D.tocsr()


class PolarMesh(Mesh):
    """Mapped polar grid on the ellipse with semi-axes ``radii`` centred at ``center``.

    Nodes sit at logical radii ``r_i = (i + 1/2) / n_r`` and angles
    ``theta_j = (j + 1/2) 2 pi / n_theta``, mapped by
    ``x = c + (a r cos theta, b r sin theta)``.  Angular derivatives are
    spectral, radial ones are centred differences; the innermost ring uses the
    diametrically opposite node as its inner neighbour.
    """

    dim = 2

    def __init__(self, center, radii, n_r, n_theta):
        n_r, n_theta = int(n_r), int(n_theta)
        if n_r < 3 or n_theta < 4 or n_theta % 2:
            raise DimensionError("polar mesh needs n_r >= 3 and an even n_theta >= 4")
        self.center = np.asarray(center, float)
        self.radii = np.asarray(radii, float)
        a, b = self.radii
        self.shape = (n_r, n_theta)
        self.dr = 1.0 / n_r
        self.dt = 2 * np.pi / n_theta
        self.r = (np.arange(n_r) + 0.5) * self.dr
        self.theta = (np.arange(n_theta) + 0.5) * self.dt
        self.h = max(a, b) * max(self.dr, self.dt)
        R, T = np.meshgrid(self.r, self.theta, indexing="ij")
        self._R, self._C, self._S = R.ravel(), np.cos(T).ravel(), np.sin(T).ravel()
        self.points = _readonly(np.column_stack([
            self.center[0] + a * self._R * self._C,
            self.center[1] + b * self._R * self._S,
        ]))
        faces_r = np.arange(n_r + 1) * self.dr
        vol = a * b * 0.5 * (faces_r[1:] ** 2 - faces_r[:-1] ** 2) * self.dt
        self.volumes = _readonly(np.repeat(vol, n_theta))
        ct, st = np.cos(self.theta), np.sin(self.theta)
        nrm = np.column_stack([ct / a, st / b])
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        self.boundary = BoundaryFaces(
            points=_readonly(np.column_stack([self.center[0] + a * ct, self.center[1] + b * st])),
            normals=_readonly(nrm),
            areas=_readonly(np.sqrt(a**2 * st**2 + b**2 * ct**2) * self.dt),
            cells=(n_r - 1) * n_theta + np.arange(n_theta),
        )
        k = np.arange(n_theta // 2 + 1).astype(float)
        k[-1] = 0.0
        self._ik = 1j * k

    # logical derivatives -------------------------------------------------
    def _d_r(self, g):
        n_r, n_t = self.shape
        out = np.empty_like(g)
        out[1:-1] = (g[2:] - g[:-2]) / (2 * self.dr)
        opposite = np.roll(g[0], n_t // 2, axis=0)
        out[0] = (g[1] - opposite) / (2 * self.dr)
        out[-1] = (3 * g[-1] - 4 * g[-2] + g[-3]) / (2 * self.dr)
        return out

    def _d_theta(self, g):
        n_t = self.shape[1]
        spec = np.fft.rfft(g, axis=1)
        ik = self._ik.reshape((1, -1) + (1,) * (g.ndim - 2))
        return np.fft.irfft(ik * spec, n=n_t, axis=1)

    def gradient(self, u):
        g = self._as_grid(u)
        ur = self._d_r(g).reshape((self.n,) + g.shape[2:])
        ut = self._d_theta(g).reshape((self.n,) + g.shape[2:])
        extra = (slice(None),) + (None,) * (g.ndim - 2)
        R, C, S = self._R[extra], self._C[extra], self._S[extra]
        a, b = self.radii
        gx = (C * ur - S * ut / R) / a
        gy = (S * ur + C * ut / R) / b
        return np.stack([gx, gy], axis=1)

    def logical_coords(self, pts):
        pts = np.asarray(pts, float).reshape(-1, 2)
        s = (pts - self.center) / self.radii
        r = np.hypot(s[:, 0], s[:, 1])
        th = np.mod(np.arctan2(s[:, 1], s[:, 0]), 2 * np.pi)
        return r, th

    def interpolate(self, u, pts):
        """Bilinear interpolation in ``(r, theta)``; linear extrapolation past
        the outermost ring."""
        g = self._as_grid(u)
        n_r, n_t = self.shape
        r, th = self.logical_coords(pts)
        ti = th / self.dt - 0.5
        j0 = np.floor(ti).astype(int)
        wt = ti - j0
        j0 %= n_t
        j1 = (j0 + 1) % n_t
        extra = (slice(None),) + (None,) * (g.ndim - 2)

        def ring(i, jj0, jj1, w):
            return (1 - w[extra]) * g[i, jj0] + w[extra] * g[i, jj1]

        ri = r / self.dr - 0.5
        inner = ri < 0
        i0 = np.clip(np.floor(ri).astype(int), 0, n_r - 2)
        wr = (ri - i0)[extra]
        out = (1 - wr) * ring(i0, j0, j1, wt) + wr * ring(i0 + 1, j0, j1, wt)
        if np.any(inner):
            k = np.nonzero(inner)[0]
            half = n_t // 2
            v_plus = ring(np.zeros(len(k), int), j0[k], j1[k], wt[k])
            v_minus = ring(np.zeros(len(k), int), (j0[k] + half) % n_t, (j1[k] + half) % n_t, wt[k])
            r0 = 0.5 * self.dr
            w = ((r[k] + r0) / (2 * r0))[extra]
            out[k] = w * v_plus + (1 - w) * v_minus
        return out

    def boundary_values(self, u):
        """Quadratic extrapolation from the three outer rings to ``r = 1``."""
        g = self._as_grid(u)
        return 1.875 * g[-1] - 1.25 * g[-2] + 0.375 * g[-3]

    def fv_layout(self):
        """Face lists and metric for the logical-coordinate finite-volume scheme."""
        n_r, n_t = self.shape
        idx = np.arange(self.n).reshape(n_r, n_t)
        w = self.dr * self.dt
        faces = [
            (idx[:-1, :].ravel(), idx[1:, :].ravel(), np.full((n_r - 1) * n_t, w), 0),
            (idx.ravel(), np.roll(idx, -1, axis=1).ravel(), np.full(n_r * n_t, w), 1),
        ]
        Dr = _fd_matrix(n_r, self.dr).tolil()
        # innermost ring: the inner neighbour is the opposite node
        Dr[0, :] = 0
        Dr[0, 1] = 1 / (2 * self.dr)
        Dr = Dr.tocsr()
        D0 = sp.kron(Dr, sp.identity(n_t), format="lil")
        for j in range(n_t):
            D0[j, (j + n_t // 2) % n_t] = -1 / (2 * self.dr)
        D0 = D0.tocsr()
        D1 = sp.kron(sp.identity(n_r), _fd_matrix(n_t, self.dt, periodic=True), format="csr")
        a, b = self.radii
        R, C, S = self._R, self._C, self._S
        # G = dx/d(r, theta); M = J G^{-1} A G^{-T}
        Ginv = np.empty((self.n, 2, 2))
        Ginv[:, 0, 0] = C / a
        Ginv[:, 0, 1] = S / b
        Ginv[:, 1, 0] = -S / (a * R)
        Ginv[:, 1, 1] = C / (b * R)
        J = a * b * R

        def metric(A):
            A = np.asarray(A, float)
            return J[:, None, None] * np.einsum("nij,njk,nlk->nil", Ginv, A, Ginv)

        return dict(faces=faces, centered=(D0, D1), spacing=(self.dr, self.dt), metric=metric)


class CartesianMesh(Mesh):
    """Cell-centred grid over a bounding box; volumes are the area of each
    cell inside the domain.  Cells outside carry zero volume."""

    dim = 2

    def __init__(self, lo, hi, shape, inside, exact_area=None, boundary=None, sub=16):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        n1, n2 = map(int, shape)
        self.lo, self.hi, self.shape = lo, hi, (n1, n2)
        self.spacing = ((hi[0] - lo[0]) / n1, (hi[1] - lo[1]) / n2)
        self.h = max(self.spacing)
        self.axes = tuple(
            lo[k] + (np.arange(m) + 0.5) * self.spacing[k] for k, m in enumerate((n1, n2)))
        s = (np.arange(sub) + 0.5) / sub - 0.5
        X = self.axes[0][:, None, None, None] + s[None, :, None, None] * self.spacing[0]
        Y = self.axes[1][None, None, :, None] + s[None, None, None, :] * self.spacing[1]
        X, Y = np.broadcast_arrays(X, Y)
        frac = inside(X, Y).mean(axis=(1, 3))
        vol = frac * self.spacing[0] * self.spacing[1]
        if exact_area is not None:
            vol *= exact_area / vol.sum()
        self.volumes = _readonly(vol.ravel())
        Xc, Yc = np.meshgrid(*self.axes, indexing="ij")
        self.points = _readonly(np.column_stack([Xc.ravel(), Yc.ravel()]))
        if boundary is None:
            boundary = BoundaryFaces(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0),
                                     np.zeros(0, int))
        else:
            pts, nrm, area = boundary
            i = np.clip(((pts[:, 0] - lo[0]) / self.spacing[0]).astype(int), 0, n1 - 1)
            j = np.clip(((pts[:, 1] - lo[1]) / self.spacing[1]).astype(int), 0, n2 - 1)
            boundary = BoundaryFaces(_readonly(pts), _readonly(nrm), _readonly(area), i * n2 + j)
        self.boundary = boundary

    def gradient(self, u):
        g = self._as_grid(u)
        d0 = np.gradient(g, self.axes[0], axis=0, edge_order=2)
        d1 = np.gradient(g, self.axes[1], axis=1, edge_order=2)
        return np.stack([d0, d1], axis=2).reshape((self.n, 2) + g.shape[2:])

    def interpolate(self, u, pts):
        pts = np.asarray(pts, float).reshape(-1, 2)
        f = RegularGridInterpolator(self.axes, self._as_grid(u), bounds_error=False,
                                    fill_value=None)
        return f(pts)

    def boundary_values(self, u):
        return np.asarray(u)[self.boundary.cells]
