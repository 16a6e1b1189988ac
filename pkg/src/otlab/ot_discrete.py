"""Discrete optimal transport for the quadratic cost.

Two solvers are provided.  :func:`solve_exact` solves the transport linear
program with a network simplex (POT's ``emd``) and returns the optimal plan
with its Kantorovich duals.  :func:`sinkhorn` solves the entropic problem in
the log domain with epsilon-scaling and optional over-relaxation.  When both
measures sit on tensor grids the Gibbs kernel factorises over the axes and
each soft c-transform costs ``O(n^{d+1})`` instead of ``O(n^{2d})``.

Dual potentials are turned into Brenier potentials by
:func:`brenier_from_duals` through ``phi = (|x|^2 - alpha) / 2``.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit, prange
from scipy.special import logsumexp

from .errors import MassError, NoConvergence, SizeCap, UnmappedPoint, ValidationError
from .measures import DensityGrid, PotentialField, quadrature_values

SIZE_CAP = 4000
DEBIAS_THRESHOLD = 1e-3
DEFAULT_TOL = 1e-6


# kernels ------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _lse_stage(u, c, inv_eps):
    """``out[a, n] = logsumexp_m(u[a, m] - c[n, m] * inv_eps)``.

    Terms more than 40 below the running maximum are skipped; their total
    relative contribution is below ``M * exp(-40)``.
    """
    A, M = u.shape
    N = c.shape[0]
    out = np.empty((A, N))
    for a in prange(A):
        for n in range(N):
            mx = -np.inf
            for m in range(M):
                v = u[a, m] - c[n, m] * inv_eps
                if v > mx:
                    mx = v
            if mx == -np.inf:
                out[a, n] = -np.inf
                continue
            s = 0.0
            for m in range(M):
                v = u[a, m] - c[n, m] * inv_eps - mx
                if v > -40.0:
                    s += np.exp(v)
            out[a, n] = mx + np.log(s)
    return out


def _logw(w):
    w = np.asarray(w, float)
    out = np.full(w.shape, -np.inf)
    np.log(w, out=out, where=w > 0)
    return out


class _DenseKernel:
    def __init__(self, x, y):
        self.x, self.y = x, y
        self.C = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=2)

    def to_source(self, g, logb, eps):
        return -eps * logsumexp(logb[None, :] + (g[None, :] - self.C) / eps, axis=1)

    def to_target(self, f, loga, eps):
        return -eps * logsumexp(loga[:, None] + (f[:, None] - self.C) / eps, axis=0)

    def cost(self, f, g, loga, logb, eps):
        P = np.exp(loga[:, None] + logb[None, :] + (f[:, None] + g[None, :] - self.C) / eps)
        return float(np.sum(P * self.C)), P


class _GridKernel:
    """Separable squared-distance kernel between two tensor grids."""

    def __init__(self, ax_x, ax_y, shape_x, shape_y):
        self.sx, self.sy = shape_x, shape_y
        self.c1 = np.ascontiguousarray((ax_x[0][:, None] - ax_y[0][None, :]) ** 2)
        self.c2 = np.ascontiguousarray((ax_x[1][:, None] - ax_y[1][None, :]) ** 2)
        self.c1t = np.ascontiguousarray(self.c1.T)
        self.c2t = np.ascontiguousarray(self.c2.T)
        self.ax_x, self.ax_y = ax_x, ax_y

    def to_source(self, g, logb, eps):
        u = np.ascontiguousarray(((g + eps * logb) / eps).reshape(self.sy))
        T = _lse_stage(u, self.c2, 1.0 / eps)                     # (m1, n2)
        R = _lse_stage(np.ascontiguousarray(T.T), self.c1, 1.0 / eps)  # (n2, n1)
        return -eps * R.T.ravel()

    def to_target(self, f, loga, eps):
        u = np.ascontiguousarray(((f + eps * loga) / eps).reshape(self.sx))
        T = _lse_stage(u, self.c2t, 1.0 / eps)                    # (n1, m2)
        R = _lse_stage(np.ascontiguousarray(T.T), self.c1t, 1.0 / eps)  # (m2, m1)
        return -eps * R.T.ravel()

    def cost(self, f, g, loga, logb, eps, chunk=512):
        X = np.stack(np.meshgrid(*self.ax_x, indexing="ij"), -1).reshape(-1, 2)
        Y = np.stack(np.meshgrid(*self.ax_y, indexing="ij"), -1).reshape(-1, 2)
        tot = 0.0
        for s in range(0, len(X), chunk):
            C = np.sum((X[s:s + chunk, None, :] - Y[None, :, :]) ** 2, axis=2)
            L = loga[s:s + chunk, None] + logb[None, :] + (f[s:s + chunk, None] + g[None, :] - C) / eps
            tot += float(np.sum(np.exp(L) * C))
        return tot, None


# measures -----------------------------------------------------------------

@dataclass
class PointMeasure:
    """Weighted point cloud; ``axes``/``shape`` are set for tensor grids."""

    points: np.ndarray
    weights: np.ndarray
    axes: tuple | None = None
    shape: tuple | None = None
    index: np.ndarray | None = None

    @property
    def mass(self):
        return float(self.weights.sum())

    def support(self):
        """Drop zero-weight points (tensor structure is lost)."""
        keep = self.weights > 0
        idx = np.nonzero(keep)[0] if self.index is None else self.index[keep]
        return PointMeasure(self.points[keep], self.weights[keep], index=idx)


def as_measure(obj):
    """Convert a DensityGrid or ``(points, weights)`` pair into a PointMeasure."""
    if isinstance(obj, PointMeasure):
        return obj
    if isinstance(obj, DensityGrid):
        mesh = obj.mesh
        pts = mesh.points
        axes = getattr(mesh, "axes", None) if mesh.dim == 2 else None
        if mesh.dim == 1:
            axes = None
        return PointMeasure(pts, obj.weights(), axes, mesh.shape if axes is not None else None,
                            np.arange(mesh.n))
    pts, w = obj
    pts = np.asarray(pts, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return PointMeasure(pts, np.asarray(w, float), index=np.arange(len(pts)))


def _check_masses(mu, nu, tol):
    if abs(mu.mass - nu.mass) > tol * max(1.0, mu.mass):
        raise MassError(f"total masses differ: {mu.mass!r} vs {nu.mass!r}")


# results ------------------------------------------------------------------

@dataclass
class DualPotentials:
    """Kantorovich potentials, gauge ``sum_i alpha_i mu_i = 0``.

    ``eps`` is ``None`` for exact (LP) duals; otherwise the potentials are
    the entropic ones and extend off the support through the soft
    c-transform.
    """

    alpha: np.ndarray
    beta: np.ndarray
    source: PointMeasure
    target: PointMeasure
    eps: float | None = None

    def __post_init__(self):
        w = self.source.weights
        s = float(np.dot(self.alpha, w) / w.sum())
        self.alpha = self.alpha - s
        self.beta = self.beta + s

    @property
    def objective(self):
        return float(np.dot(self.alpha, self.source.weights) + np.dot(self.beta, self.target.weights))

    def _scores(self, x):
        y, b = self.target.points, self.target.weights
        C = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=2)
        if self.eps is None:
            return C - self.beta[None, :]
        return _logw(b)[None, :] + (self.beta[None, :] - C) / self.eps

    def potential_at(self, x, chunk=1024):
        """``alpha`` extended to arbitrary points by the (soft) c-transform."""
        x = np.asarray(x, float).reshape(-1, self.source.points.shape[1])
        out = np.empty(len(x))
        for s in range(0, len(x), chunk):
            S = self._scores(x[s:s + chunk])
            out[s:s + chunk] = S.min(axis=1) if self.eps is None else -self.eps * logsumexp(S, axis=1)
        return out

    def barycentric_at(self, x, chunk=1024):
        """Soft (entropic) or hard (LP) c-transform argmin barycentre."""
        x = np.asarray(x, float).reshape(-1, self.source.points.shape[1])
        y = self.target.points
        out = np.empty((len(x), y.shape[1]))
        for s in range(0, len(x), chunk):
            S = self._scores(x[s:s + chunk])
            if self.eps is None:
                out[s:s + chunk] = y[np.argmin(S, axis=1)]
            else:
                W = np.exp(S - S.max(axis=1, keepdims=True))
                out[s:s + chunk] = (W @ y) / W.sum(axis=1, keepdims=True)
        return out


class TransportPlan:
    """Coupling between two weighted point sets.

    LP plans are stored sparsely.  Entropic plans are rebuilt on demand from
    the dual potentials, since grid-scale plans are too large to store.
    """

    def __init__(self, source, target, weights=None, cost=None, duals=None,
                 marginal_violation=0.0, kernel=None):
        self.source, self.target = source, target
        self._weights = weights
        self._cost = cost
        self.duals = duals
        self.marginal_violation = float(marginal_violation)
        self._kernel = kernel

    @property
    def weights(self):
        if self._weights is None:
            n, m = len(self.source.weights), len(self.target.weights)
            if n * m > 5 * 10**7:
                raise SizeCap(f"plan with {n} x {m} entries is too large to materialise")
            d = self.duals
            C = np.sum((self.source.points[:, None, :] - self.target.points[None, :, :]) ** 2, axis=2)
            L = (_logw(self.source.weights)[:, None] + _logw(self.target.weights)[None, :]
                 + (d.alpha[:, None] + d.beta[None, :] - C) / d.eps)
            P = np.exp(L)
            P[P < 1e-300] = 0.0
            self._weights = sp.csr_matrix(P)
        return self._weights

    @property
    def cost(self):
        if self._cost is None:
            if self._kernel is not None:
                d = self.duals
                self._cost, _ = self._kernel.cost(d.alpha, d.beta, _logw(self.source.weights),
                                                  _logw(self.target.weights), d.eps)
            else:
                P = self.weights.tocoo()
                diff = self.source.points[P.row] - self.target.points[P.col]
                self._cost = float(np.sum(P.data * np.sum(diff**2, axis=1)))
        return self._cost

    @property
    def atoms(self):
        return int(self.weights.nnz)

    def row_sums(self):
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def col_sums(self):
        return np.asarray(self.weights.sum(axis=0)).ravel()


# exact solver -------------------------------------------------------------

def _import_pot():
    for name in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot
    return ot


def solve_exact(mu, nu, mass_tol=1e-10):
    """Optimal plan and duals of the transport LP for ``|x - y|^2``.

    Parameters
    ----------
    mu, nu : DensityGrid, PointMeasure or (points, weights)

    Returns
    -------
    plan : TransportPlan
    duals : DualPotentials

    Raises
    ------
    MassError
        Total masses differ by more than ``mass_tol``.
    SizeCap
        More than 4000 support points on either side.
    """
    mu, nu = as_measure(mu).support(), as_measure(nu).support()
    _check_masses(mu, nu, mass_tol)
    if len(mu.weights) > SIZE_CAP or len(nu.weights) > SIZE_CAP:
        raise SizeCap(f"exact solver limited to {SIZE_CAP} atoms per side "
                      f"(got {len(mu.weights)} and {len(nu.weights)})")
    ot = _import_pot()
    a = mu.weights
    b = nu.weights * (a.sum() / nu.weights.sum())
    C = np.sum((mu.points[:, None, :] - nu.points[None, :, :]) ** 2, axis=2)
    G, log = ot.emd(a, b, C, numItermax=10**7, log=True)
    if log.get("warning"):
        raise NoConvergence(f"network simplex: {log['warning']}")
    G = np.where(G > 1e-16 * a.sum(), G, 0.0)
    duals = DualPotentials(np.asarray(log["u"], float), np.asarray(log["v"], float), mu,
                           PointMeasure(nu.points, b, index=nu.index))
    plan = TransportPlan(mu, duals.target, sp.csr_matrix(G), float(np.sum(G * C)), duals)
    plan.marginal_violation = float(max(np.abs(plan.row_sums() - a).sum(),
                                        np.abs(plan.col_sums() - b).sum()))
    return plan, duals


def reduced_costs(duals):
    """``c_ij - alpha_i - beta_j`` on all pairs."""
    x, y = duals.source.points, duals.target.points
    C = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=2)
    return C - duals.alpha[:, None] - duals.beta[None, :]


# entropic solver ----------------------------------------------------------

@dataclass
class SinkhornState:
    f: np.ndarray
    g: np.ndarray
    iterations: int = 0
    violation: float = np.inf
    history: list = field(default_factory=list)


def _schedule(eps, start=1.0, factor=0.5):
    out = []
    e = max(start, eps)
    while e > eps:
        out.append(e)
        e *= factor
    out.append(eps)
    return out


def _violation(kernel, f, g, a, b, loga, logb, eps):
    fs = kernel.to_source(g, logb, eps)
    gs = kernel.to_target(f, loga, eps)
    row = np.sum(np.abs(a * np.expm1(np.clip((f - fs) / eps, -700, 700))))
    col = np.sum(np.abs(b * np.expm1(np.clip((g - gs) / eps, -700, 700))))
    return float(max(row, col))


def _make_kernel(mu, nu):
    if mu.axes is not None and nu.axes is not None:
        return _GridKernel(mu.axes, nu.axes, mu.shape, nu.shape), mu, nu
    mu, nu = mu.support(), nu.support()
    return _DenseKernel(mu.points, nu.points), mu, nu


def sinkhorn(mu, nu, eps, schedule=None, tol=DEFAULT_TOL, max_iter=20000, omega=1.8,
             init=None, stage_iters=3, check_every=10, mass_tol=1e-8):
    """Entropic transport in the log domain.

    Parameters
    ----------
    mu, nu : DensityGrid, PointMeasure or (points, weights)
    eps : float
        Target regularisation.
    schedule : sequence of float, optional
        Regularisation levels ending at ``eps``.  Defaults to halving from
        1.0.  Intermediate levels get ``stage_iters`` sweeps; ignored when
        ``init`` is given.
    tol : float
        L1 marginal violation at which iteration stops.
    omega : float
        Over-relaxation factor used at the final level (1 = plain Sinkhorn).
    init : (f, g), optional
        Warm start.

    Returns
    -------
    plan : TransportPlan
    duals : DualPotentials
        ``duals.objective`` is the regularised transport cost.
    """
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    mu, nu = as_measure(mu), as_measure(nu)
    _check_masses(mu, nu, mass_tol)
    kernel, mu, nu = _make_kernel(mu, nu)
    a = mu.weights
    b = nu.weights * (a.sum() / nu.weights.sum())
    loga, logb = _logw(a), _logw(b)
    if init is not None:
        f, g = (np.array(v, float) for v in init)
        levels = [eps]
    else:
        f, g = np.zeros(len(a)), np.zeros(len(b))
        levels = list(schedule) if schedule is not None else _schedule(eps)
        if levels[-1] != eps:
            levels.append(eps)
    for e in levels[:-1]:
        for _ in range(stage_iters):
            f = kernel.to_source(g, logb, e)
            g = kernel.to_target(f, loga, e)
    err = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        fn = kernel.to_source(g, logb, eps)
        f = fn if omega == 1.0 else (1 - omega) * f + omega * fn
        gn = kernel.to_target(f, loga, eps)
        g = gn if omega == 1.0 else (1 - omega) * g + omega * gn
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise NoConvergence("Sinkhorn potentials became non-finite", err)
        if it % check_every == 0:
            err = _violation(kernel, f, g, a, b, loga, logb, eps)
            if err < tol:
                break
    else:
        raise NoConvergence(f"Sinkhorn did not reach tol={tol:g} in {max_iter} iterations "
                            f"(violation {err:.3g})", err)
    nu_scaled = PointMeasure(nu.points, b, nu.axes, nu.shape, nu.index)
    duals = DualPotentials(f, g, mu, nu_scaled, eps)
    duals.iterations = it
    plan = TransportPlan(mu, nu_scaled, duals=duals, marginal_violation=err, kernel=kernel)
    return plan, duals


def sinkhorn_symmetric(mu, eps, tol=DEFAULT_TOL, max_iter=20000, init=None, check_every=5):
    """Regularised self-transport cost ``OT_eps(mu, mu)`` by the averaged
    fixed-point iteration ``f <- (f + T(f)) / 2``.

    Returns
    -------
    objective : float
    f : ndarray
    """
    mu = as_measure(mu)
    kernel, mu, _ = _make_kernel(mu, mu)
    a = mu.weights
    loga = _logw(a)
    if init is not None:
        f = np.array(init, float)
        levels = [eps]
    else:
        f = np.zeros(len(a))
        levels = _schedule(eps)
    for e in levels[:-1]:
        for _ in range(3):
            f = 0.5 * (f + kernel.to_target(f, loga, e))
    err = np.inf
    for it in range(1, max_iter + 1):
        fn = kernel.to_target(f, loga, eps)
        if it % check_every == 0:
            err = float(np.sum(np.abs(a * np.expm1(np.clip((f - fn) / eps, -700, 700)))))
            if err < tol:
                f = fn
                break
        f = 0.5 * (f + fn)
    else:
        raise NoConvergence(f"symmetric Sinkhorn did not reach tol={tol:g}", err)
    return float(2 * np.dot(a, f)), f


# distances ----------------------------------------------------------------

def _grid_h(mu):
    mu = as_measure(mu)
    if mu.axes is not None:
        return max(float(ax[1] - ax[0]) for ax in mu.axes)
    return None


def wasserstein2(mu, nu, backend="exact", eps=None, debias=None, tol=DEFAULT_TOL, **kw):
    """Quadratic Wasserstein distance between two discrete measures.

    With ``backend="sinkhorn"`` and ``eps > 1e-3`` the self-transport costs
    are subtracted (Sinkhorn divergence); ``debias`` overrides that rule.

    Returns
    -------
    dict
        ``d2``, ``d2_squared``, ``backend``, ``eps``, ``debiased``,
        ``marginal_violation``, ``atoms``.
    """
    if backend == "exact":
        plan, duals = solve_exact(mu, nu)
        return {"d2": float(np.sqrt(max(plan.cost, 0.0))), "d2_squared": float(plan.cost),
                "backend": "exact", "eps": None, "debiased": False,
                "marginal_violation": plan.marginal_violation, "atoms": plan.atoms,
                "dual_objective": duals.objective}
    if backend != "sinkhorn":
        raise ValidationError(f"unknown backend {backend!r}")
    if eps is None:
        h = _grid_h(mu) or 0.05
        eps = h * h
    if debias is None:
        debias = eps > DEBIAS_THRESHOLD
    plan, duals = sinkhorn(mu, nu, eps, tol=tol, **kw)
    val = duals.objective
    if debias:
        saa, _ = sinkhorn_symmetric(mu, eps, tol=tol)
        sbb, _ = sinkhorn_symmetric(nu, eps, tol=tol)
        val = val - 0.5 * (saa + sbb)
    n_atoms = int(np.count_nonzero(as_measure(mu).weights)) * int(
        np.count_nonzero(as_measure(nu).weights))
    return {"d2": float(np.sqrt(max(val, 0.0))), "d2_squared": float(val), "backend": "sinkhorn",
            "eps": float(eps), "debiased": bool(debias),
            "marginal_violation": plan.marginal_violation, "atoms": n_atoms}


class DebiasedSinkhorn:
    """Callable ``(f, g) -> d2^2`` (Sinkhorn divergence) with warm starts.

    Successive calls reuse the previous potentials as initial guesses, and a
    self-transport term is recomputed only when its measure changed.  Used
    for finite-difference quotients where many nearby problems are solved.
    """

    def __init__(self, eps, tol=1e-10, omega=1.9, max_iter=50000):
        self.eps, self.tol, self.omega, self.max_iter = eps, tol, omega, max_iter
        self._xy = None
        self._self = {}
        self.calls = 0

    def _self_cost(self, m, role):
        key = (role, m.weights.tobytes())
        if key in self._self:
            return self._self[key][0]
        prev = self._self.get(role)
        obj, f = sinkhorn_symmetric(m, self.eps, tol=self.tol, max_iter=self.max_iter,
                                    init=None if prev is None else prev[1])
        self._self[key] = (obj, f)
        self._self[role] = (obj, f)
        return obj

    def __call__(self, f, g):
        mu, nu = as_measure(f), as_measure(g)
        _, duals = sinkhorn(mu, nu, self.eps, tol=self.tol, omega=self.omega,
                            max_iter=self.max_iter, init=self._xy)
        self._xy = (duals.alpha, duals.beta)
        self.calls += 1
        return duals.objective - 0.5 * (self._self_cost(mu, "x") + self._self_cost(nu, "y"))


def plan_distance(pi0, pi1):
    """Wasserstein distance between two plans viewed as measures on R^{2d}."""
    def atoms(pi):
        P = pi.weights.tocoo()
        return np.hstack([pi.source.points[P.row], pi.target.points[P.col]]), P.data

    x0, w0 = atoms(pi0)
    x1, w1 = atoms(pi1)
    if len(w0) > SIZE_CAP or len(w1) > SIZE_CAP:
        raise SizeCap(f"plans have {len(w0)} and {len(w1)} atoms; cap is {SIZE_CAP}")
    w1 = w1 * (w0.sum() / w1.sum())
    plan, _ = solve_exact((x0, w0), (x1, w1), mass_tol=1e-6)
    return float(np.sqrt(max(plan.cost, 0.0)))


# Brenier potential --------------------------------------------------------

def hessian_bracket(domain, target_diameter, a=0.0, sup_g=np.inf, lam_cap=None):
    """Ellipticity bracket ``[lam_floor, lam_cap]``.

    ``lam_cap = 10 diam(target) / diam(source)`` unless given;
    ``lam_floor = (a / sup g) lam_cap^{1-d}``, from ``det D^2 phi >= a / sup g``
    and the upper eigenvalue bound.
    """
    if lam_cap is None:
        lam_cap = 10.0 * target_diameter / domain.diameter
    d = domain.dim
    lam_floor = 0.0 if not np.isfinite(sup_g) or sup_g <= 0 else (a / sup_g) * lam_cap ** (1 - d)
    return float(lam_floor), float(lam_cap)


def _diameter(points):
    lo, hi = points.min(axis=0), points.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def brenier_from_duals(duals, domain, plan=None, source=None, target=None, lam_cap=None):
    """Brenier potential on the nodes of ``domain`` from transport duals.

    ``phi = (|x|^2 - alpha) / 2`` shifted to zero mean; the gradient is the
    barycentric map; the Hessian is the symmetrised finite-difference
    Jacobian of the gradient, clamped to :func:`hessian_bracket`.

    For entropic duals the potential and the barycentric map are evaluated
    at any node through the soft c-transform.  For exact duals the node
    set must contain the source support and ``plan`` supplies the
    barycentric rows; nodes off the support use the hard c-transform.

    Raises
    ------
    UnmappedPoint
        A node with positive volume has an empty plan row.
    """
    mesh = domain.mesh
    x = mesh.points
    alpha = duals.potential_at(x)
    if duals.eps is None:
        grad = duals.barycentric_at(x)
        if plan is not None:
            idx = duals.source.index
            P = plan.weights
            rows = np.asarray(P.sum(axis=1)).ravel()
            bary = (P @ duals.target.points) / np.where(rows > 0, rows, 1.0)[:, None]
            grad[idx[rows > 0]] = bary[rows > 0]
            mapped = np.zeros(mesh.n, bool)
            mapped[idx[rows > 0]] = True
            if np.any(mesh.active & ~mapped):
                bad = int(np.nonzero(mesh.active & ~mapped)[0][0])
                raise UnmappedPoint(f"node {bad} at {x[bad]} carries volume but no plan mass")
            alpha[idx] = duals.alpha
    else:
        grad = duals.barycentric_at(x)
    phi = 0.5 * (np.sum(x**2, axis=1) - alpha)
    phi = phi - quadrature_values(mesh, phi) / mesh.volumes.sum()
    a = source.inf if source is not None else 0.0
    sup_g = target.sup if target is not None else np.inf
    bracket = hessian_bracket(domain, _diameter(duals.target.points[duals.target.weights > 0]),
                              a, sup_g, lam_cap)
    H = mesh.jacobian(grad)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    return PotentialField(domain, phi, grad, H, bracket)


__all__ = [
    "PointMeasure", "as_measure", "DualPotentials", "TransportPlan", "solve_exact",
    "reduced_costs", "sinkhorn", "sinkhorn_symmetric", "wasserstein2", "DebiasedSinkhorn",
    "plan_distance", "brenier_from_duals", "hessian_bracket",
]
