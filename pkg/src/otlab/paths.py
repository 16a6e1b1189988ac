"""Curves of densities: displacement geodesics, linear and multiplicative paths.

A :class:`DensityPath` evaluates ``f_t`` and ``d f_t / dt`` at any admissible
``t``.  Geodesics also provide the Eulerian velocity ``v_t`` defined by
``v_t((1-t) x + t T(x)) = T(x) - x``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .domain import Domain
from .errors import (DomainError, IncompleteInput, KindError, MeanError, MeshMismatch,
                     RangeError)
from .measures import DensityGrid, PotentialField, ScalarField, quadrature
from .ot1d import brenier_map_1d

ACTION_NODES = 33


@dataclass
class VelocitySample:
    """Velocity on the mesh of ``f_t``; ``boundary_flux`` is the largest
    normal component on boundary faces."""

    t: float
    domain: Domain
    values: np.ndarray
    boundary_flux: float = 0.0


class DensityPath:
    """Parametrised family ``t -> f_t``.

    Parameters
    ----------
    kind : {"geodesic", "linear", "multiplicative"}
    density : callable
        ``t -> DensityGrid``.
    derivative : callable
        ``t -> ScalarField`` on the mesh of ``density(t)``.
    t_range : (float, float)
        Admissible parameters (inclusive).
    """

    def __init__(self, kind, density, derivative, t_range=(0.0, 1.0), **meta):
        self.kind = kind
        self._density = density
        self._derivative = derivative
        self.t_range = t_range
        self.meta = meta

    def _check(self, t):
        lo, hi = self.t_range
        if not lo <= t <= hi:
            raise RangeError(f"t = {t} outside admissible range [{lo}, {hi}]")

    def density(self, t):
        self._check(t)
        return self._density(float(t))

    def derivative(self, t):
        self._check(t)
        return self._derivative(float(t))

    def __call__(self, t):
        return self.density(t)


def linear_path(f0, f1):
    """``f_t = (1 - t) f0 + t f1`` with ``d f_t / dt = f1 - f0``."""
    if not f0.mesh.same_as(f1.mesh):
        raise MeshMismatch("linear path endpoints must share a mesh")
    floor = min(f0.floor, f1.floor)
    diff = f1.values - f0.values

    def dens(t):
        if t == 0.0:
            return f0
        if t == 1.0:
            return f1
        return DensityGrid(f0.domain, (1 - t) * f0.values + t * f1.values, floor, normalize=False)

    return DensityPath("linear", dens, lambda t: ScalarField(f0.domain, diff), (0.0, 1.0),
                       f0=f0, f1=f1)


def constant_path(f):
    """Stationary path, useful as the target side of a response problem."""
    zero = np.zeros(f.mesh.n)
    return DensityPath("linear", lambda t: f, lambda t: ScalarField(f.domain, zero),
                       (-np.inf, np.inf), f0=f, f1=f)


def center(h, f):
    """Subtract the ``f``-weighted mean so that ``int h f = 0``."""
    h = np.asarray(getattr(h, "values", h), float)
    return h - np.dot(h * f.values, f.mesh.volumes) / f.mass


def multiplicative_path(f, h, mean_tol=1e-8):
    """``f_t = f (1 + t h)`` for ``|t| sup|h| < 1``.

    Raises
    ------
    MeanError
        ``|int h f| > mean_tol``.
    """
    hv = np.asarray(getattr(h, "values", h), float).reshape(f.mesh.n)
    m = float(np.dot(hv * f.values, f.mesh.volumes))
    if abs(m) > mean_tol:
        raise MeanError(f"perturbation has weighted mean {m:.3g}; expected 0")
    sup = float(np.max(np.abs(hv[f.mesh.active]))) if hv.size else 0.0
    t_max = np.inf if sup == 0 else 1.0 / sup
    deriv = f.values * hv

    def dens(t):
        if abs(t) * sup >= 1:
            raise RangeError(f"|t| sup|h| = {abs(t) * sup:.3g} >= 1; density would vanish")
        if t == 0.0:
            return f
        return DensityGrid(f.domain, f.values * (1 + t * hv), 0.0, normalize=False)

    return DensityPath("multiplicative", dens, lambda t: ScalarField(f.domain, deriv),
                       (-np.inf, np.inf), f=f, h=hv, t_max=t_max)


# geodesics ----------------------------------------------------------------

def _geodesic_1d(f0, f1):
    T = brenier_map_1d(f0, f1)
    x = f0.mesh.x
    n = f0.mesh.n
    g_at_T = np.interp(T.values, f1.mesh.x, f1.values)
    dT = f0.values / np.maximum(g_at_T, 1e-300)
    disp = T.values - x

    def slice_at(t):
        Tt = x + t * disp
        dom = Domain.interval(Tt[0], Tt[-1], n) if Tt[-1] > Tt[0] else None
        if dom is None:
            raise DomainError("geodesic slice collapsed to a point")
        z = dom.mesh.x
        xs = np.interp(z, Tt, x)
        jac = (1 - t) + t * np.interp(xs, x, dT)
        vals = np.interp(xs, x, f0.values) / jac
        v = np.interp(xs, x, disp)
        return dom, vals, v

    def dens(t):
        if t == 0.0:
            return f0
        dom, vals, _ = slice_at(t)
        return DensityGrid(dom, vals, 0.0, normalize=True)

    def deriv(t):
        dom, vals, v = slice_at(t)
        ft = vals / np.dot(vals, dom.mesh.volumes)
        return ScalarField(dom, -dom.mesh.divergence((ft * v)[:, None]))

    def vel(t):
        dom, _, v = slice_at(t)
        flux = float(np.max(np.abs(dom.mesh.boundary_values(v))))
        return VelocitySample(t, dom, v[:, None], flux)

    return dens, deriv, vel, T


def _invert_map(domain, grad, hess, t, z, iters=30):
    """Solve ``(1-t) x + t grad(x) = z`` by Newton on mesh interpolants."""
    mesh = domain.mesh
    I = np.eye(domain.dim)
    Tt_nodes = (1 - t) * mesh.points + t * grad
    tree = cKDTree(Tt_nodes)
    _, nearest = tree.query(z)
    x = mesh.points[nearest].copy()
    for _ in range(iters):
        gx = mesh.interpolate(grad, x)
        Hx = mesh.interpolate(hess.reshape(mesh.n, -1), x).reshape(-1, domain.dim, domain.dim)
        res = (1 - t) * x + t * gx - z
        J = (1 - t) * I + t * Hx
        step = np.linalg.solve(J, res[..., None])[..., 0]
        x = x - step
        if np.max(np.abs(res)) < 1e-12:
            break
    bad = ~np.all(np.isfinite(x), axis=1) | (np.linalg.norm(
        (1 - t) * x + t * mesh.interpolate(grad, x) - z, axis=1) > mesh.h)
    x[bad] = mesh.points[nearest[bad]]
    return x


def _geodesic_2d(f0, f1, solver):
    if not f0.mesh.same_as(f1.mesh):
        raise DomainError("two-dimensional geodesics need endpoints on a common convex domain")
    phi = solver(f0, f1)
    if not isinstance(phi, PotentialField):
        raise DomainError("solver must return a PotentialField")
    dom = f0.domain
    mesh = dom.mesh
    grad, hess = phi.grad, phi.hess.values
    disp = grad - mesh.points

    def slice_at(t):
        z = mesh.points
        x = _invert_map(dom, grad, hess, t, z) if t > 0 else z.copy()
        H = mesh.interpolate(hess.reshape(mesh.n, -1), x).reshape(-1, dom.dim, dom.dim)
        det = np.linalg.det((1 - t) * np.eye(dom.dim) + t * H)
        vals = mesh.interpolate(f0.values, x) / det
        inside = dom.defining_function(x) <= mesh.h
        vals = np.where(inside & (vals > 0), vals, 0.0)
        v = mesh.interpolate(disp, x)
        return vals, v

    def dens(t):
        if t == 0.0:
            return f0
        vals, _ = slice_at(t)
        return DensityGrid(dom, vals, 0.0, normalize=True)

    def deriv(t):
        vals, v = slice_at(t)
        ft = vals / np.dot(vals, mesh.volumes)
        return ScalarField(dom, -mesh.divergence(ft[:, None] * v))

    def vel(t):
        _, v = slice_at(t)
        flux = float(np.max(np.abs(np.sum(mesh.boundary_values(v) * mesh.boundary.normals,
                                          axis=1)))) if len(mesh.boundary) else 0.0
        return VelocitySample(t, dom, v, flux)

    return dens, deriv, vel, phi


def geodesic(f0, f1, solver=None):
    """Displacement interpolation between ``f0`` and ``f1``.

    In 1D the monotone rearrangement is exact and each slice lives on the
    interval ``T_t([a, b])``.  In 2D ``solver(f0, f1)`` must return a
    :class:`PotentialField` on the common domain; the pushforward is
    evaluated by Newton inversion of ``(1-t) x + t grad zeta(x)`` with a
    nearest-node fallback.  ``d f_t / dt`` comes from the continuity
    equation.
    """
    if f0.domain.dim == 1:
        dens, deriv, vel, T = _geodesic_1d(f0, f1)
        return DensityPath("geodesic", dens, deriv, (0.0, 1.0), velocity=vel, map=T, f0=f0, f1=f1)
    if solver is None:
        raise DomainError("a 2D geodesic needs a transport solver")
    dens, deriv, vel, phi = _geodesic_2d(f0, f1, solver)
    return DensityPath("geodesic", dens, deriv, (0.0, 1.0), velocity=vel, potential=phi,
                       f0=f0, f1=f1)


def velocity(path, t):
    """Eulerian velocity of a geodesic at time ``t``."""
    if path.kind != "geodesic":
        raise KindError(f"velocity is defined for geodesic paths, not {path.kind!r}")
    if not 0 <= t < 1:
        raise RangeError(f"velocity needs 0 <= t < 1, got {t}")
    return path.meta["velocity"](float(t))


def continuity_velocity_1d(path, t):
    """Velocity ``v`` with ``d f/dt + (f v)' = 0`` and ``v = 0`` at the left
    end, for any 1D path on a fixed interval."""
    ft = path.density(t)
    dft = path.derivative(t).values
    x = ft.mesh.x
    flux = -np.concatenate([[0.0], np.cumsum(0.5 * (dft[1:] + dft[:-1]) * np.diff(x))])
    v = flux / np.maximum(ft.values, 1e-300)
    return VelocitySample(t, ft.domain, v[:, None], float(abs(v[-1])))


def action_times(n=ACTION_NODES):
    return (np.arange(n) + 0.5) / n


def bb_action(path, velocities=None, n_t=ACTION_NODES):
    """Kinetic action ``int_0^1 int |v_t|^2 f_t dx dt`` (midpoint rule in t).

    Parameters
    ----------
    path : DensityPath
    velocities : sequence of VelocitySample, optional
        One sample per midpoint node; computed automatically for geodesics.

    Raises
    ------
    IncompleteInput
        Velocities missing for a non-geodesic path, or the wrong count.
    """
    ts = action_times(n_t)
    if velocities is None:
        if path.kind != "geodesic":
            raise IncompleteInput("velocities are required for non-geodesic paths")
        velocities = [velocity(path, t) for t in ts]
    if len(velocities) != n_t:
        raise IncompleteInput(f"expected {n_t} velocity samples, got {len(velocities)}")
    total = 0.0
    for t, vs in zip(ts, velocities):
        if vs is None or abs(vs.t - t) > 1e-12:
            raise IncompleteInput(f"missing velocity at t = {t:.6g}")
        ft = path.density(t)
        if not ft.mesh.same_as(vs.domain.mesh):
            raise MeshMismatch("velocity and density slices live on different meshes")
        speed2 = np.sum(np.asarray(vs.values).reshape(ft.mesh.n, -1) ** 2, axis=1)
        total += quadrature(ScalarField(ft.domain, speed2), ft)
    return total / n_t


__all__ = [
    "DensityPath", "VelocitySample", "linear_path", "constant_path", "multiplicative_path",
    "center", "geodesic", "velocity", "continuity_velocity_1d", "bb_action", "action_times",
]
