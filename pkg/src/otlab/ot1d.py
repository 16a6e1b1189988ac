"""Exact optimal transport on the line.

Everything here rests on the monotone rearrangement ``T = G^{-1} o F``.
Densities live on vertex grids; cumulative distribution functions are
trapezoidal and piecewise linear, and quantiles are their exact inverses.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import (DegenerateEps, DimensionError, ExponentError, FloorError, MeshMismatch,
                     RangeError)


@dataclass(frozen=True)
class Cdf1D:
    """Piecewise-linear CDF on the nodes ``grid``."""

    grid: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.grid, self.values, left=0.0, right=1.0)


@dataclass(frozen=True)
class Map1D:
    """Monotone map sampled at the source nodes."""

    source: np.ndarray
    values: np.ndarray

    @property
    def min_increment(self):
        return float(np.min(np.diff(self.values)))

    def __call__(self, x):
        return np.interp(x, self.source, self.values)

    def derivative(self):
        return np.gradient(self.values, self.source, edge_order=2)


def _require_1d(*dens):
    for d in dens:
        if d.domain.dim != 1:
            raise DimensionError("one-dimensional density expected")


def cdf(f):
    """Trapezoidal CDF of a 1D density, renormalised so the last value is 1."""
    _require_1d(f)
    x = f.mesh.x
    F = cumulative_trapezoid(f.values, x, initial=0.0)
    F = F / F[-1]
    return Cdf1D(x, F)


def quantile(F, s):
    """Inverse of a piecewise-linear CDF.

    On flat stretches the leftmost preimage is returned.

    Parameters
    ----------
    F : Cdf1D
    s : float or array_like in [0, 1]
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < -1e-12) or np.any(s_arr > 1 + 1e-12) or np.any(np.isnan(s_arr)):
        raise RangeError("quantile level outside [0, 1]")
    s_arr = np.clip(s_arr, 0.0, 1.0)
    x, v = F.grid, F.values
    k = np.searchsorted(v, s_arr, side="left")
    k = np.clip(k, 1, len(v) - 1)
    lo, hi = v[k - 1], v[k]
    span = np.where(hi > lo, hi - lo, 1.0)
    w = np.clip((s_arr - lo) / span, 0.0, 1.0)
    out = x[k - 1] + w * (x[k] - x[k - 1])
    # s at or below the first value: leftmost node carrying that level
    first = np.searchsorted(v, s_arr, side="left") == 0
    out = np.where(first, x[0], out)
    return out if out.ndim else float(out)


def brenier_map_1d(f, g):
    """Monotone transport map from ``f`` to ``g`` at the nodes of ``f``."""
    _require_1d(f, g)
    T = quantile(cdf(g), cdf(f).values)
    return Map1D(f.mesh.x, np.maximum.accumulate(T))


def quantile_levels(*dens, factor=4):
    """Midpoint levels in ``(0, 1)`` at ``factor`` times the finest resolution."""
    n = factor * max(d.mesh.n - 1 for d in dens)
    return (np.arange(n) + 0.5) / n


def d2_1d(f, g):
    """Quadratic Wasserstein distance by quantile quadrature.

    Examples
    --------
    >>> from otlab.measures import Domain, DensityGrid
    >>> u = DensityGrid.uniform(Domain.interval(0, 1, 101))
    >>> v = DensityGrid.uniform(Domain.interval(0.25, 1.25, 101))
    >>> round(d2_1d(u, v), 10)
    0.25
    """
    _require_1d(f, g)
    s = quantile_levels(f, g)
    diff = quantile(cdf(f), s) - quantile(cdf(g), s)
    return float(np.sqrt(np.mean(diff**2)))


def potential_1d(f, g):
    """Brenier potential ``phi`` with ``phi' = T`` and zero mean on the source."""
    T = brenier_map_1d(f, g)
    phi = cumulative_trapezoid(T.values, T.source, initial=0.0)
    vol = f.mesh.volumes
    return phi - np.dot(vol, phi) / vol.sum(), T


# L1 distance of piecewise-linear densities extended by zero ---------------

def _segment_abs_integral(u, v, length):
    """Exact integral of ``|linear|`` over a segment with end values u, v."""
    same = u * v >= 0
    au, av = np.abs(u), np.abs(v)
    tot = au + av
    cross = np.where(tot > 0, (u**2 + v**2) / np.where(tot > 0, tot, 1.0), 0.0)
    return np.where(same, 0.5 * tot, 0.5 * cross) * length


def l1_distance(f, g):
    """``||f - g||_{L^1(R)}`` for piecewise-linear densities extended by zero."""
    _require_1d(f, g)
    xf, xg = f.mesh.x, g.mesh.x
    brk = np.union1d(xf, xg)
    u, v = brk[:-1], brk[1:]
    mid = 0.5 * (u + v)

    def piece(x, vals, at):
        inside = (mid >= x[0]) & (mid <= x[-1])
        return np.where(inside, np.interp(at, x, vals), 0.0)

    du = piece(xf, f.values, u) - piece(xg, g.values, u)
    dv = piece(xf, f.values, v) - piece(xg, g.values, v)
    return float(np.sum(_segment_abs_integral(du, dv, v - u)))


def verify_linfty_l1(f0, f1, g0, g1, a):
    """Check ``||T_1 - T_0||_inf <= (||f_1-f_0||_1 + ||g_1-g_0||_1) / a``.

    The maps are compared at the nodes of the (shared) source mesh; the
    inequality is declared to hold with a slack of ten mesh cells.

    Returns
    -------
    dict with keys ``lhs``, ``rhs``, ``holds``, ``h``.
    """
    if not a > 0:
        raise FloorError(f"floor a must be positive, got {a}")
    _require_1d(f0, f1, g0, g1)
    if not f0.mesh.same_as(f1.mesh):
        raise MeshMismatch("source densities must share a mesh")
    for g in (g0, g1):
        if g.inf < a * (1 - 1e-12):
            raise FloorError(f"target density minimum {g.inf:.3g} below a = {a}")
    T0, T1 = brenier_map_1d(f0, g0), brenier_map_1d(f1, g1)
    lhs = float(np.max(np.abs(T1.values - T0.values)))
    rhs = (l1_distance(f1, f0) + l1_distance(g1, g0)) / a
    h = max(d.mesh.h for d in (f0, f1, g0, g1))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + 10 * h), "h": h}


# counterexample family with a vanishing target density ---------------------

def counterexample_density(x, p, a):
    """``g_a``: zero at ``a``, power ``p`` on each side, unit mass on [0, 1]."""
    x = np.asarray(x, float)
    left = (p + 1) * a ** (-p) * np.clip(a - x, 0, None) ** p
    right = (p + 1) * (1 - a) ** (-p) * np.clip(x - a, 0, None) ** p
    return np.where(x <= a, left, right)


def counterexample_cdf(x, p, a):
    x = np.clip(np.asarray(x, float), 0.0, 1.0)
    left = a * (1 - (1 - x / a) ** (p + 1))
    right = a + (1 - a) * ((x - a) / (1 - a)) ** (p + 1)
    return np.where(x <= a, left, right)


def counterexample_quantile(s, p, a):
    """Closed-form inverse of :func:`counterexample_cdf`."""
    s = np.clip(np.asarray(s, float), 0.0, 1.0)
    q = 1.0 / (p + 1)
    left = a * (1 - np.clip(1 - s / a, 0, None) ** q)
    right = a + (1 - a) * np.clip((s - a) / (1 - a), 0, None) ** q
    return np.where(s <= a, left, right)


def _refined_sup(fn, lo, hi, breaks, n=200001):
    """Sup of |fn| on [lo, hi]: dense sampling plus golden refinement."""
    grid = np.union1d(np.linspace(lo, hi, n), np.clip(breaks, lo, hi))
    vals = np.abs(fn(grid))
    k = int(np.argmax(vals))
    best = float(vals[k])
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    g = (np.sqrt(5) - 1) / 2
    c, d = right - g * (right - left), left + g * (right - left)
    for _ in range(80):
        if abs(fn(c)) > abs(fn(d)):
            right = d
        else:
            left = c
        c, d = right - g * (right - left), left + g * (right - left)
    return max(best, float(abs(fn(0.5 * (left + right)))))


def counterexample_row(p, eta, eps):
    """One row of the sharpness table for the pair ``g_a``, ``g_{1/2}``."""
    if eps == 0:
        raise DegenerateEps("eps = 0 makes both densities equal; the ratio is undefined")
    if not 0 < eps < 0.5:
        raise RangeError(f"eps must lie in (0, 1/2), got {eps}")
    a = 1.0 / (2.0 * (1.0 - eps))
    brk = np.array([0.5, a])
    qdiff = _refined_sup(
        lambda s: counterexample_quantile(s, p, a) - counterexample_quantile(s, p, 0.5),
        0.0, 1.0, brk)
    ddiff = _refined_sup(
        lambda x: counterexample_density(x, p, a) - counterexample_density(x, p, 0.5),
        0.0, 1.0, brk)
    gap_half = float(abs(counterexample_quantile(0.5, p, a) - 0.5))
    return {"eps": float(eps), "a": a, "quantile_sup": qdiff, "density_sup": ddiff,
            "ratio": qdiff / ddiff**eta, "quantile_gap_half": gap_half}


def counterexample_sweep(p, eta, eps_list):
    """Sharpness table for a target density vanishing at one point.

    Parameters
    ----------
    p : float
        Vanishing order, ``p > 1``.
    eta : float
        Trial Hölder exponent in ``(1/(p+1), 1)``.
    eps_list : sequence of float

    Returns
    -------
    list of dict
        Keys ``eps``, ``a``, ``quantile_sup`` (sup of the quantile difference),
        ``density_sup`` (sup of the density difference), ``ratio`` and
        ``quantile_gap_half`` (the quantile difference at level 1/2).
    """
    if not p > 1:
        raise ExponentError(f"p must exceed 1, got {p}")
    if not (1.0 / (p + 1) < eta < 1):
        raise ExponentError(f"eta must lie in (1/(p+1), 1) = ({1/(p+1):.4g}, 1), got {eta}")
    return [counterexample_row(p, eta, e) for e in eps_list]


__all__ = [
    "Cdf1D", "Map1D", "cdf", "quantile", "brenier_map_1d", "d2_1d", "potential_1d",
    "l1_distance", "verify_linfty_l1", "counterexample_density", "counterexample_cdf",
    "counterexample_quantile", "counterexample_sweep", "counterexample_row",
]
