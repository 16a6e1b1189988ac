"""Stability sweeps, Brascamp-Lieb checks and identity suites.

Sweeps run over seeded families of one-dimensional data ``(f0, f1, g0, g1)``
and report ratios of the two sides of each stability estimate.  Ratios are
reported as observed; no constant is fitted.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import Domain
from .errors import (ConfigError, ConvexityError, DimensionError, ExponentError, MeshMismatch,
                     OtlabError)
from .measures import DensityGrid, PotentialField, ScalarField, SpdField, holder_seminorm
from .ot1d import (brenier_map_1d, cdf, counterexample_sweep, d2_1d, l1_distance,
                   potential_1d, quantile)

CLAMP_LIMIT = 0.5
PLAN_LEVELS = 256


# report --------------------------------------------------------------------

@dataclass
class StabilityReport:
    """Rows of one sweep, sorted by perturbation size.

    Each row has at least ``size``, ``lhs``, ``rhs``, ``ratio`` and
    ``flagged``.  ``ratio`` is ``None`` when ``rhs == 0``.
    """

    theorem: str
    rows: list
    family: dict
    backend: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r["size"], r.get("index", 0)))

    @property
    def ratios(self):
        return np.array([r["ratio"] for r in self.rows
                         if r["ratio"] is not None and not r["flagged"]], float)

    def column(self, key):
        return np.array([r.get(key, np.nan) for r in self.rows], float)

    def to_dict(self):
        return {"theorem": self.theorem, "family": self.family, "backend": self.backend,
                "rows": [dict(r) for r in self.rows]}


def _ratio(lhs, rhs, power=1.0):
    return None if rhs <= 0 else float(lhs / rhs**power)


# families ------------------------------------------------------------------

@dataclass
class Instance:
    size: float
    f0: DensityGrid
    f1: DensityGrid
    g0: DensityGrid
    g1: DensityGrid


@dataclass
class Family:
    """Seeded family; ``descriptor`` rebuilds it through :func:`make_family`."""

    name: str
    seed: int
    params: dict
    instances: list

    @property
    def descriptor(self):
        return {"name": self.name, "seed": self.seed, "params": dict(self.params)}


def _trig(rng, n_modes, amp):
    """Random cosine series on [0, 1] as a callable."""
    c = rng.normal(size=n_modes) / (1.0 + np.arange(n_modes)) ** 2
    ph = rng.uniform(0, 2 * np.pi, n_modes)
    c *= amp / max(np.sum(np.abs(c)), 1e-300)

    def fn(x):
        k = np.arange(1, n_modes + 1)
        return np.sum(c * np.cos(np.pi * np.outer(x, k) + ph), axis=1)

    return fn


def _dens(dom, vals, normalize=True):
    return DensityGrid(dom, vals, 0.0, normalize=normalize)


def translation_family(sizes=(0.02, 0.05, 0.1, 0.15, 0.2), n=401, scale=1.0, seed=0):
    """Uniform source; uniform target shifted by ``s * scale``."""
    dom = Domain.interval(0.0, scale, n)
    u = DensityGrid.uniform(dom)
    inst = [Instance(float(s), u, u, u, DensityGrid.uniform(
        Domain.interval(s * scale, (1 + s) * scale, n))) for s in sizes]
    return Family("translation", seed, {"sizes": list(map(float, sizes)), "n": n,
                                        "scale": scale}, inst)


def multiplicative_family(sizes=(0.05, 0.1, 0.2, 0.3, 0.4), n=401, scale=1.0, seed=0):
    """``f1 = 1 + t cos(pi x / scale)`` against a fixed uniform target."""
    dom = Domain.interval(0.0, scale, n)
    x = dom.mesh.x / scale
    u = DensityGrid.uniform(dom)
    inst = [Instance(float(t), u, _dens(dom, 1 + t * np.cos(np.pi * x)), u, u) for t in sizes]
    return Family("multiplicative", seed, {"sizes": list(map(float, sizes)), "n": n,
                                           "scale": scale}, inst)


def piecewise_family(sizes=(0.025, 0.05, 0.1, 0.2, 0.4), n=801, scale=1.0, seed=0, pieces=4):
    """Discontinuous piecewise-constant perturbations of uniform densities.

    Breakpoints and signs are drawn once from ``seed``; ``s`` scales the
    jump heights so ``||f1 - f0||_2`` is proportional to ``s``.
    """
    rng = np.random.default_rng(seed)
    dom = Domain.interval(0.0, scale, n)
    x = dom.mesh.x / scale

    def pattern():
        brk = np.sort(rng.uniform(0.05, 0.95, pieces - 1))
        lev = rng.uniform(-1, 1, pieces)
        idx = np.searchsorted(brk, x, side="right")
        w = np.diff(np.concatenate([[0.0], brk, [1.0]]))
        lev = lev - np.dot(lev, w)
        return lev[idx] / max(np.max(np.abs(lev)), 1e-300)

    pf, pg = pattern(), pattern()
    u = DensityGrid.uniform(dom)
    inst = [Instance(float(s), u, _dens(dom, 1 + 0.9 * s * pf), u, _dens(dom, 1 + 0.9 * s * pg))
            for s in sizes]
    return Family("piecewise", seed, {"sizes": list(map(float, sizes)), "n": n, "scale": scale,
                                      "pieces": pieces}, inst)


def smooth_family(sizes=(0.025, 0.05, 0.1, 0.2, 0.4), n=401, scale=1.0, seed=0, modes=4):
    """Smooth positive ``f0, g0`` with smooth multiplicative perturbations."""
    rng = np.random.default_rng(seed)
    dom = Domain.interval(0.0, scale, n)
    x = dom.mesh.x / scale
    b_f, b_g = _trig(rng, modes, 0.3), _trig(rng, modes, 0.3)
    h, k = _trig(rng, modes, 0.9), _trig(rng, modes, 0.9)
    f0, g0 = _dens(dom, 1 + b_f(x)), _dens(dom, 1 + b_g(x))
    inst = [Instance(float(s), f0, _dens(dom, f0.values * (1 + s * h(x))), g0,
                     _dens(dom, g0.values * (1 + s * k(x)))) for s in sizes]
    return Family("smooth", seed, {"sizes": list(map(float, sizes)), "n": n, "scale": scale,
                                   "modes": modes, "beta": 1.0}, inst)


FAMILIES = {
    "translation": translation_family,
    "multiplicative": multiplicative_family,
    "piecewise": piecewise_family,
    "smooth": smooth_family,
}


def make_family(name, seed=0, **params):
    """Build a registered family; unknown names or keys raise ConfigError."""
    if name not in FAMILIES:
        raise ConfigError(f"family: unknown name {name!r}; choose from {sorted(FAMILIES)}")
    gen = FAMILIES[name]
    allowed = set(gen.__code__.co_varnames[:gen.__code__.co_argcount]) - {"seed"}
    bad = sorted(set(params) - allowed)
    if bad:
        raise ConfigError(f"family.{bad[0]}: not a parameter of family {name!r}")
    return gen(seed=seed, **params)


# one-dimensional norms -------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def lp_distance(f, g, p):
    """``||f - g||_{L^p(R)}`` for piecewise-linear densities extended by zero.

    Exact for ``p = 1`` and ``p = 2``; eight-point Gauss-Legendre per
    segment otherwise.
    """
    if p == 1:
        return l1_distance(f, g)
    xf, xg = f.mesh.x, g.mesh.x
    brk = np.union1d(xf, xg)
    u, v = brk[:-1], brk[1:]
    mid = 0.5 * (u + v)

    def piece(x, vals, at):
        inside = (mid >= x[0]) & (mid <= x[-1])
        return np.where(inside, np.interp(at, x, vals), 0.0)

    du = piece(xf, f.values, u) - piece(xg, g.values, u)
    dv = piece(xf, f.values, v) - piece(xg, g.values, v)
    L = v - u
    if p == 2:
        return float(np.sqrt(np.sum(L * (du**2 + du * dv + dv**2) / 3.0)))
    tau = 0.5 * (_GL_X + 1.0)
    vals = np.abs(du[:, None] * (1 - tau) + dv[:, None] * tau) ** p
    return float(np.sum(0.5 * L * (vals @ _GL_W)) ** (1.0 / p))


def _lebesgue_l2(mesh, v):
    return float(np.sqrt(np.dot(mesh.volumes, np.asarray(v, float) ** 2)))


def normalized_potential(f, g):
    """Potential with ``int e^{-phi} = 1`` and its map.

    Returns
    -------
    phi : ndarray
    T : Map1D
    normalization_error : float
        ``|int e^{-phi} - 1|`` by the mesh quadrature.
    """
    phi, T = potential_1d(f, g)
    vol = f.mesh.volumes
    c = np.log(np.dot(vol, np.exp(-phi)))
    phi = phi + c
    return phi, T, float(abs(np.dot(vol, np.exp(-phi)) - 1.0))


def plan_distance_1d(f0, g0, f1, g1, levels=PLAN_LEVELS):
    """``d_2`` between two monotone plans, each a measure on R^2.

    Each plan is the law of ``(F^{-1}(s), G^{-1}(s))`` for uniform ``s``,
    sampled at ``levels`` midpoint levels and compared by exact LP.
    """
    from .ot_discrete import solve_exact

    s = (np.arange(levels) + 0.5) / levels
    a0 = np.column_stack([quantile(cdf(f0), s), quantile(cdf(g0), s)])
    a1 = np.column_stack([quantile(cdf(f1), s), quantile(cdf(g1), s)])
    w = np.full(levels, 1.0 / levels)
    plan, _ = solve_exact((a0, w), (a1, w))
    return float(np.sqrt(max(plan.cost, 0.0)))


# sweeps --------------------------------------------------------------------

def _workers(threads):
    if threads is None:
        threads = int(os.environ.get("OTLAB_THREADS", "1") or 1)
    return max(1, int(threads))


def _run(family, fn, threads):
    """Apply ``fn`` to every instance; failures flag the row instead of dropping it."""
    def one(item):
        i, inst = item
        try:
            row = fn(inst)
            row["flagged"] = False
        except (OtlabError, FloatingPointError) as exc:
            row = {"lhs": float("nan"), "rhs": float("nan"), "ratio": None,
                   "flagged": True, "error": f"{type(exc).__name__}: {exc}"}
        return {"size": inst.size, "index": i, **row}

    items = list(enumerate(family.instances))
    n = _workers(threads)
    if n == 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(one, items))


def _check_backend(family, backend):
    if backend not in ("exact", "exact1d"):
        raise ConfigError(f"backend: sweeps use the exact 1D backend, got {backend!r}")
    for inst in family.instances:
        for d in (inst.f0, inst.f1, inst.g0, inst.g1):
            if d.domain.dim != 1:
                raise DimensionError("stability sweeps are one-dimensional")
        if not inst.f0.mesh.same_as(inst.f1.mesh):
            raise MeshMismatch("f0 and f1 must share a mesh")


def thm11_sweep(family, backend="exact", threads=None):
    """Map stability in Lebesgue L2 and plan stability against
    ``d2(f0, f1) + d2(g0, g1)``.

    Row keys: ``lhs`` (map difference in L2 of the source interval),
    ``lhs_plan`` (distance between plans), ``rhs``, ``ratio``, ``ratio_plan``.
    """
    _check_backend(family, backend)

    def row(inst):
        T0 = brenier_map_1d(inst.f0, inst.g0)
        T1 = brenier_map_1d(inst.f1, inst.g1)
        lhs = _lebesgue_l2(inst.f0.mesh, T1.values - T0.values)
        lhs_plan = plan_distance_1d(inst.f0, inst.g0, inst.f1, inst.g1)
        rhs = d2_1d(inst.f0, inst.f1) + d2_1d(inst.g0, inst.g1)
        return {"lhs": lhs, "lhs_plan": lhs_plan, "rhs": rhs,
                "ratio": _ratio(lhs, rhs), "ratio_plan": _ratio(lhs_plan, rhs)}

    return StabilityReport("1.1", _run(family, row, threads), family.descriptor,
                           {"name": "exact", "plan_levels": PLAN_LEVELS})


def thm12_sweep(family, backend="exact", threads=None):
    """Potential stability under ``int e^{-phi} = 1`` against L2 density differences.

    Row keys: ``lhs`` (potentials), ``lhs_grad`` (maps), ``rhs``, ``ratio``
    (``lhs / rhs``), ``ratio_grad`` (``lhs_grad / rhs^{1/3}``) and
    ``normalization_error``.
    """
    _check_backend(family, backend)

    def row(inst):
        phi0, T0, e0 = normalized_potential(inst.f0, inst.g0)
        phi1, T1, e1 = normalized_potential(inst.f1, inst.g1)
        mesh = inst.f0.mesh
        lhs = _lebesgue_l2(mesh, phi1 - phi0)
        lhs_grad = _lebesgue_l2(mesh, T1.values - T0.values)
        rhs = lp_distance(inst.f0, inst.f1, 2) + lp_distance(inst.g0, inst.g1, 2)
        return {"lhs": lhs, "lhs_grad": lhs_grad, "rhs": rhs, "ratio": _ratio(lhs, rhs),
                "ratio_grad": _ratio(lhs_grad, rhs, 1.0 / 3.0),
                "normalization_error": max(e0, e1)}

    return StabilityReport("1.2", _run(family, row, threads), family.descriptor,
                           {"name": "exact"})


def c1alpha_norm(mesh, u, du, alpha):
    """``sup|u| + sup|u'| + [u']_alpha`` on the nodes."""
    hold, _ = holder_seminorm(mesh.points, du, alpha)
    return float(np.max(np.abs(u)) + np.max(np.abs(du)) + hold)


def thm13_sweep(family, alpha=0.5, backend="exact", threads=None):
    """``C^{1,alpha}`` stability of zero-mean potentials against L^p density
    differences with ``p = d / (1 - alpha)``.

    Raises
    ------
    ExponentError
        ``alpha`` outside ``(0, beta)`` where ``beta`` is the family's
        Hölder order.
    """
    beta = float(family.params.get("beta", 1.0))
    if not 0 < alpha < beta:
        raise ExponentError(f"alpha must lie in (0, {beta}) for this family, got {alpha}")
    _check_backend(family, backend)
    p = 1.0 / (1.0 - alpha)

    def row(inst):
        phi0, T0 = potential_1d(inst.f0, inst.g0)
        phi1, T1 = potential_1d(inst.f1, inst.g1)
        lhs = c1alpha_norm(inst.f0.mesh, phi1 - phi0, T1.values - T0.values, alpha)
        rhs = lp_distance(inst.f0, inst.f1, p) + lp_distance(inst.g0, inst.g1, p)
        return {"lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs)}

    return StabilityReport("1.3", _run(family, row, threads), family.descriptor,
                           {"name": "exact", "alpha": alpha, "p": p})


def sharpness_report(p=2.0, eta=0.9, eps_list=(1e-1, 1e-2, 1e-3, 1e-4)):
    """Negative control with a target density vanishing at one point.

    Rows keep the order of ``eps_list`` in ``index``; ``size`` is ``eps``.
    """
    rows = []
    for i, r in enumerate(counterexample_sweep(p, eta, eps_list)):
        rows.append({**r, "size": r["eps"], "index": i, "lhs": r["quantile_sup"],
                     "rhs": r["density_sup"], "flagged": False})
    return StabilityReport("1.3-control", rows, {"name": "counterexample", "seed": 0,
                                                 "params": {"p": p, "eta": eta,
                                                            "eps": list(map(float, eps_list))}},
                           {"name": "closed-form"})


# Brascamp-Lieb ----------------------------------------------------------------

def brascamp_lieb_check(F, u, hess=None):
    """Variance of ``u`` under ``e^{-F}`` against the Hessian-weighted energy.

    Parameters
    ----------
    F, u : ScalarField on the same mesh
    hess : ndarray (N, d, d), optional
        Hessian of ``F``; finite differences otherwise.

    Returns
    -------
    dict with ``lhs``, ``rhs``, ``margin`` and ``clamp_rate``.

    Raises
    ------
    ConvexityError
        More than half of the nodes needed their Hessian clamped.
    """
    dom = F.domain
    mesh = dom.mesh
    if not mesh.same_as(u.mesh):
        raise MeshMismatch("F and u must share a mesh")
    Fv, uv = np.asarray(F.values, float), np.asarray(u.values, float)
    H = mesh.hessian(Fv) if hess is None else np.asarray(hess, float).reshape(mesh.n, dom.dim, dom.dim)
    top = float(np.max(np.abs(H))) if H.size else 1.0
    spd = SpdField(dom, H).clamp(1e-8 * max(top, 1.0), np.inf)
    if spd.clamp_rate > CLAMP_LIMIT:
        raise ConvexityError(f"Hessian clamped at {spd.clamp_rate:.0%} of nodes; F is not convex")
    w = mesh.volumes * np.exp(-(Fv - Fv.min()))
    w = w / w.sum()
    mean = np.dot(w, uv)
    lhs = float(np.dot(w, (uv - mean) ** 2))
    gu = mesh.gradient(uv).reshape(mesh.n, dom.dim)
    q = np.einsum("ni,ni->n", gu, np.linalg.solve(spd.values, gu[..., None])[..., 0])
    rhs = float(np.dot(w, q))
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "clamp_rate": spd.clamp_rate}


def random_bl_instance(rng, domain):
    """Convex ``F`` (SPD quadratic plus softplus bump) and a trig polynomial ``u``."""
    x = domain.mesh.points
    B = rng.normal(size=(2, 2))
    Q = B @ B.T + 0.2 * np.eye(2)
    w, b, c = rng.normal(size=2), rng.normal(), rng.uniform(0, 2)
    s = x @ w + b
    F = 0.5 * np.einsum("ni,ij,nj->n", x, Q, x) + c * np.logaddexp(0.0, s)
    sig = 1.0 / (1.0 + np.exp(-s))
    H = Q + c * (sig * (1 - sig))[:, None, None] * np.outer(w, w)
    K = rng.integers(-2, 3, size=(3, 2))
    amp, ph = rng.normal(size=3), rng.uniform(0, 2 * np.pi, 3)
    u = np.sum(amp * np.sin(x @ K.T + ph), axis=1)
    return ScalarField(domain, F), ScalarField(domain, u), H


def brascamp_lieb_suite(n_instances=200, seed=0, shape=(16, 64)):
    """Seeded instances on the unit disk; returns one dict per instance."""
    rng = np.random.default_rng(seed)
    dom = Domain.disk(1.0, shape=shape)
    out = []
    for i in range(n_instances):
        F, u, _ = random_bl_instance(rng, dom)
        res = brascamp_lieb_check(F, u)
        res["index"] = i
        out.append(res)
    return out


# identity suites -----------------------------------------------------------------

def _slopes(hs, vals):
    hs, vals = np.asarray(hs, float), np.asarray(vals, float)
    return [float(np.log(vals[i] / vals[i + 1]) / np.log(hs[i] / hs[i + 1]))
            for i in range(len(vals) - 1)]


def _smooth_potential(x):
    """``|x|^2 / 2 + 0.05 sin(x1) cos(x2)`` with exact derivatives."""
    s1, c1 = np.sin(x[:, 0]), np.cos(x[:, 0])
    s2, c2 = np.sin(x[:, 1]), np.cos(x[:, 1])
    e = 0.05
    val = 0.5 * np.sum(x**2, axis=1) + e * s1 * c2
    grad = x + e * np.column_stack([c1 * c2, -s1 * s2])
    H = np.empty((len(x), 2, 2))
    H[:, 0, 0] = 1 - e * s1 * c2
    H[:, 1, 1] = 1 - e * s1 * c2
    H[:, 0, 1] = H[:, 1, 0] = -e * c1 * s2
    return val, grad, H


def _target_density(y):
    return np.exp(0.2 * y[:, 0] - 0.1 * y[:, 1] ** 2)


def _target_density_grad(y):
    g = _target_density(y)
    return np.column_stack([0.2 * g, -0.2 * y[:, 1] * g])


def magic_study(levels=(8, 16, 32), consistent=True):
    """Magic-identity residual under refinement on the unit disk.

    ``f = g(grad phi) det D^2 phi`` exactly when ``consistent``; otherwise
    ``f`` is tilted by ``1 + 0.2 x1`` as a negative control.
    """
    from .linear_response import magic_residual

    hs, res = [], []
    for n in levels:
        dom = Domain.disk(1.0, shape=(n, 4 * n))
        x = dom.mesh.points
        val, grad, H = _smooth_potential(x)
        phi = PotentialField(dom, val, grad, H)
        f = _target_density(grad) * np.linalg.det(H)
        if not consistent:
            f = f * (1 + 0.2 * x[:, 0])
        xi = np.sin(x[:, 0] + 0.5) * np.cos(2 * x[:, 1])
        res.append(magic_residual(ScalarField(dom, f), (_target_density, _target_density_grad),
                                  phi, xi))
        hs.append(float(dom.mesh.h))
    return {"h": hs, "residual": res, "slopes": _slopes(hs, res)}


def cofactor_study(levels=(8, 16, 32)):
    """Cofactor divergence for a quadratic and for a smooth non-quadratic potential."""
    from .linear_response import _interior_mask, cofactor_divergence

    quad, smooth, hs = [], [], []
    for n in levels:
        dom = Domain.disk(1.0, shape=(n, 4 * n))
        mesh = dom.mesh
        m = _interior_mask(mesh, 2)
        q = PotentialField.from_quadratic(dom, [[2.0, 0.3], [0.3, 0.5]])
        quad.append(float(np.max(np.abs(cofactor_divergence(q)))))
        val, grad, _ = _smooth_potential(mesh.points)
        s = PotentialField.from_values(dom, val, grad)
        r = np.linalg.norm(cofactor_divergence(s), axis=1)
        smooth.append(float(np.sqrt(np.sum(mesh.volumes[m] * r[m] ** 2))))
        hs.append(float(mesh.h))
    return {"h": hs, "quadratic": quad, "smooth": smooth, "slopes": _slopes(hs, smooth)}


def boundary_normal_identity(shape=(16, 64)):
    """Boundary-normal residual for the identity map on the unit disk."""
    from .linear_response import boundary_normal_residual

    dom = Domain.disk(1.0, shape=shape)
    phi = PotentialField.from_quadratic(dom, np.eye(2))
    return boundary_normal_residual(phi, dom, dom)


def identity_suite(levels=(8, 16, 32)):
    return {"magic": magic_study(levels), "magic_control": magic_study(levels, consistent=False),
            "cofactor": cofactor_study(levels), "boundary_normal": boundary_normal_identity()}


__all__ = [
    "StabilityReport", "Family", "Instance", "FAMILIES", "make_family", "translation_family",
    "multiplicative_family", "piecewise_family", "smooth_family", "lp_distance",
    "normalized_potential", "plan_distance_1d", "thm11_sweep", "thm12_sweep", "thm13_sweep",
    "c1alpha_norm", "sharpness_report", "brascamp_lieb_check", "random_bl_instance",
    "brascamp_lieb_suite", "magic_study", "cofactor_study", "boundary_normal_identity",
    "identity_suite",
]
