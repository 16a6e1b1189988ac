"""Linearised Monge-Ampere problem in divergence form.

Solves

    -div(A grad xi) = p   in Omega,
    -<A grad xi, n>  = |A n| q   on the boundary,

with ``A = f (D^2 phi)^{-1}`` and the gauge ``int xi = 0``.  Here ``q`` is
the inward conormal flux normalised by ``|A n|``; solvability requires
``int p = int |A n| q``.

Discretisation: finite volumes on structured meshes.  Each face carries a
two-point flux along its logical axis plus half of the cross-metric term
built from averaged centred differences, so the operator is exactly
symmetric and its kernel is the constants.  One-dimensional problems use
two-point fluxes and can be solved in closed form by cumulative sums.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import IncompatibleData, NoConvergence, RangeError, ValidationError
from .measures import PotentialField, ScalarField, SpdField, quadrature_values

COMPAT_TOL = 1e-6


@dataclass
class EllipticProblem:
    """Assembled system ``K xi = b``.

    Attributes
    ----------
    domain : Domain
    A : ndarray (N, d, d)
        Coefficient field.
    p : ndarray (N,)
    q : ndarray (F,)
        Normalised inward conormal flux per boundary face.
    K : scipy.sparse.csr_matrix
        Symmetric positive semidefinite stiffness matrix.
    b : ndarray (N,)
        Load vector.
    compatibility : float
        ``int p - int |A n| q`` (discrete).
    scale : float
        ``int |p| + int |A n| |q|``, used to judge the residual.
    clamp_rate : float
    """

    domain: object
    A: np.ndarray
    p: np.ndarray
    q: np.ndarray
    K: sp.csr_matrix
    b: np.ndarray
    compatibility: float
    scale: float
    clamp_rate: float = 0.0


@dataclass
class ResponseField:
    """Zero-mean solution with solver diagnostics."""

    domain: object
    values: np.ndarray
    iterations: int
    residual: float
    compatibility: float
    raw_compatibility: float = 0.0
    clamp_rate: float = 0.0
    problem: EllipticProblem | None = None

    def as_field(self):
        return ScalarField(self.domain, self.values)

    def diagnostics(self):
        return {"iterations": int(self.iterations), "residual": float(self.residual),
                "compatibility": float(self.compatibility),
                "raw_compatibility": float(self.raw_compatibility),
                "clamp_rate": float(self.clamp_rate)}


def _coefficient(f, hess):
    """``A = f (D^2 phi)^{-1}`` from a density (or scalar array) and an SpdField."""
    fv = np.asarray(getattr(f, "values", f), float)
    H = hess.values if isinstance(hess, SpdField) else np.asarray(hess, float)
    return fv[:, None, None] * np.linalg.inv(H)


def stiffness(domain, A):
    """Symmetric finite-volume stiffness matrix for ``-div(A grad .)``.

    In 2D the flux is two-point along the logical axis plus half the
    cross-metric term per face.  The matrix is positive semidefinite for
    moderate anisotropy (eigenvalue ratio of ``A`` up to about 16); strongly
    anisotropic coefficients can make it indefinite.
    """
    mesh = domain.mesh
    n = mesh.n
    A = np.asarray(A, float)
    if domain.dim == 1:
        a_face = 0.5 * (A[:-1, 0, 0] + A[1:, 0, 0])
        w = a_face / np.diff(mesh.x)
        i = np.arange(n - 1)
        K = sp.coo_matrix((np.concatenate([w, w, -w, -w]),
                           (np.concatenate([i, i + 1, i, i + 1]),
                            np.concatenate([i, i + 1, i + 1, i]))), shape=(n, n))
        return K.tocsr()
    lay = mesh.fv_layout()
    M = lay["metric"](A)
    Dc = lay["centered"]
    rows, cols, vals = [], [], []
    K = sp.csr_matrix((n, n))
    for ia, ib, W, ax in lay["faces"]:
        other = 1 - ax
        h = lay["spacing"][ax]
        Mf = 0.5 * (M[ia] + M[ib])
        m_nn = W * Mf[:, ax, ax]
        m_nt = W * 0.5 * Mf[:, ax, other]
        nf = len(ia)
        # two-point difference operator on faces
        r = np.arange(nf)
        Dn = sp.csr_matrix((np.concatenate([np.full(nf, -1 / h), np.full(nf, 1 / h)]),
                            (np.concatenate([r, r]), np.concatenate([ia, ib]))), shape=(nf, n))
        Dt = 0.5 * (Dc[other][ia] + Dc[other][ib])
        K = K + Dn.T @ sp.diags(m_nn) @ Dn
        cross = Dn.T @ sp.diags(m_nt) @ Dt
        K = K + cross + cross.T
    K = 0.5 * (K + K.T)
    return K.tocsr()


def _boundary_A_normal(domain, A):
    mesh = domain.mesh
    bA = mesh.boundary_values(A.reshape(mesh.n, -1)).reshape(-1, domain.dim, domain.dim)
    An = np.einsum("fij,fj->fi", bA, mesh.boundary.normals)
    return np.linalg.norm(An, axis=1)


def assemble(f, hess, p, q=None, check=True, A=None):
    """Assemble the conormal problem.

    Parameters
    ----------
    f : DensityGrid or ScalarField
    hess : SpdField
        Clamped Hessian of the potential.
    p : ScalarField or array_like
        Interior source.
    q : array_like, optional
        Normalised inward conormal flux per boundary face (default 0).
    check : bool
        Raise :class:`IncompatibleData` when the discrete balance
        ``int p - int |A n| q`` exceeds ``1e-6`` of ``scale``.
    A : array_like, optional
        Coefficient field overriding ``f (hess)^{-1}``.
    """
    domain = f.domain
    mesh = domain.mesh
    pv = np.asarray(getattr(p, "values", p), float).reshape(mesh.n)
    A = _coefficient(f, hess) if A is None else np.asarray(A, float)
    nb = len(mesh.boundary)
    qv = np.zeros(nb) if q is None else np.asarray(q, float).reshape(nb)
    An = _boundary_A_normal(domain, A)
    bflux = mesh.boundary.areas * An * qv
    b = mesh.volumes * pv
    np.subtract.at(b, mesh.boundary.cells, bflux)
    compat = float(b.sum())
    scale = float(np.sum(np.abs(mesh.volumes * pv)) + np.sum(np.abs(bflux)))
    if check and abs(compat) > COMPAT_TOL * max(scale, 1e-300) and abs(compat) > 1e-14:
        raise IncompatibleData(
            f"compatibility violated: int p - int |An| q = {compat:.3g} (scale {scale:.3g})")
    rate = hess.clamp_rate if isinstance(hess, SpdField) else 0.0
    return EllipticProblem(domain, A, pv, qv, stiffness(domain, A), b, compat, scale, rate)


def deflated_pcg(K, b, rtol=1e-10, maxiter=None, x0=None):
    """Jacobi-preconditioned CG on the complement of the constants.

    Returns
    -------
    x, iterations, relative_residual
    """
    n = len(b)
    maxiter = 20 * n if maxiter is None else maxiter

    def proj(v):
        return v - v.mean()

    b = proj(b)
    diag = K.diagonal()
    dinv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    x = np.zeros(n) if x0 is None else proj(np.array(x0, float))
    r = b - K @ x
    bn = np.linalg.norm(b)
    if bn == 0:
        return np.zeros(n), 0, 0.0
    z = proj(dinv * r)
    d = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Kd = K @ d
        curv = d @ Kd
        if not curv > 0:
            res = np.linalg.norm(r) / bn
            raise NoConvergence(f"CG met non-positive curvature {curv:.3g} at iteration {it}; "
                                "the coefficient is too anisotropic for the scheme", res)
        alpha = rz / curv
        x += alpha * d
        r -= alpha * Kd
        r = proj(r)
        res = np.linalg.norm(r) / bn
        if res <= rtol:
            return x, it, res
        z = proj(dinv * r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise NoConvergence(f"CG stopped after {maxiter} iterations at residual {res:.3g}", res)


def _zero_mean(mesh, x):
    return x - quadrature_values(mesh, x) / mesh.volumes.sum()


def solve_1d_closed_form(problem):
    """Exact solution of the 1D two-point scheme by cumulative sums.

    The flux through the face between nodes ``k`` and ``k+1`` is minus the
    load accumulated on nodes ``0..k``; dividing by the face conductance and
    summing again gives ``xi`` up to a constant.
    """
    mesh = problem.domain.mesh
    b = problem.b - problem.b.sum() / mesh.n
    A = problem.A[:, 0, 0]
    cond = 0.5 * (A[:-1] + A[1:]) / np.diff(mesh.x)
    flux = np.cumsum(b)[:-1]
    xi = np.concatenate([[0.0], np.cumsum(flux / cond)])
    xi = _zero_mean(mesh, -xi)
    res = np.linalg.norm(problem.K @ xi - b) / max(np.linalg.norm(b), 1e-300)
    return xi, res


def solve(problem, method="auto", rtol=1e-10):
    """Solve an assembled problem; returns a :class:`ResponseField`."""
    mesh = problem.domain.mesh
    if method == "auto":
        method = "closed" if problem.domain.dim == 1 else "cg"
    if method == "closed":
        if problem.domain.dim != 1:
            raise ValidationError("closed-form solve is one-dimensional")
        xi, res = solve_1d_closed_form(problem)
        it = 0
    elif method == "cg":
        xi, it, res = deflated_pcg(problem.K, problem.b, rtol=rtol)
        xi = _zero_mean(mesh, xi)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return ResponseField(problem.domain, xi, it, float(res), problem.compatibility,
                         problem.compatibility, problem.clamp_rate, problem)


def project_rhs(p, f):
    """Remove the discrete mean of ``p`` along ``f``: ``p - (int p / int f) f``."""
    fv = np.asarray(f.values, float)
    vol = f.mesh.volumes
    return p - (np.dot(vol, p) / np.dot(vol, fv)) * fv


def response_rhs(f, df, g_at, dg_at):
    """``(dg(grad phi)/g(grad phi) - df/f) f``."""
    fv = np.asarray(f.values, float)
    return (dg_at / g_at) * fv - np.asarray(df, float)


def _target_eval(density, field_values, pts):
    mesh = density.domain.mesh
    return mesh.interpolate(field_values, pts)


def solve_response(path_f, path_g, phi, t, method="auto"):
    """First-order response ``xi = d phi_t / dt`` of the Brenier potential.

    Parameters
    ----------
    path_f, path_g : DensityPath
        Source and target paths.
    phi : PotentialField
        Potential between ``f_t`` and ``g_t`` on the source mesh.
    t : float

    Notes
    -----
    The right-hand side is projected along ``f_t`` before solving so that the
    discrete balance holds to round-off; ``raw_compatibility`` records the
    value before projection, ``compatibility`` after.
    """
    ft = path_f.density(t)
    dft = path_f.derivative(t).values
    gt = path_g.density(t)
    dgt = path_g.derivative(t).values
    if not ft.mesh.same_as(phi.mesh):
        raise ValidationError("potential and source density must share a mesh")
    y = phi.grad
    g_at = _target_eval(gt, gt.values, y)
    dg_at = _target_eval(gt, dgt, y)
    if np.any(g_at[ft.mesh.active] <= 0):
        raise RangeError("target density vanishes at the image of some node")
    p = response_rhs(ft, dft, g_at, dg_at)
    raw = float(np.dot(ft.mesh.volumes, p))
    p = project_rhs(p, ft)
    prob = assemble(ft, phi.hess, p, check=False)
    out = solve(prob, method)
    out.raw_compatibility = raw
    out.compatibility = prob.compatibility
    return out


def energy(problem, xi):
    """Discrete ``int <A grad xi, grad xi>`` = ``xi^T K xi``."""
    xi = np.asarray(getattr(xi, "values", xi), float)
    return float(xi @ (problem.K @ xi))


def load_pairing(problem, xi):
    """Discrete ``int xi p - int xi |A n| q`` = ``xi^T b``."""
    xi = np.asarray(getattr(xi, "values", xi), float)
    return float(xi @ problem.b)


# identities ---------------------------------------------------------------

def _interior_mask(mesh, layers=2):
    if mesh.dim == 1:
        m = np.ones(mesh.n, bool)
        m[:layers] = m[-layers:] = False
        return m
    m = np.ones(mesh.shape, bool)
    if hasattr(mesh, "dr"):
        m[-layers:, :] = False
    else:
        m[:layers, :] = m[-layers:, :] = False
        m[:, :layers] = m[:, -layers:] = False
    return m.ravel() & mesh.active


def magic_residual(f, g, phi, xi, layers=2):
    """L2 norm on interior nodes of

        f (tr[(D^2 phi)^{-1} D^2 xi] + <grad g(grad phi), grad xi> / g(grad phi))
        - div(f (D^2 phi)^{-1} grad xi).

    Parameters
    ----------
    f : DensityGrid or ScalarField on the source mesh
    g : DensityGrid on a target mesh, or a pair of callables
        ``(g(y), grad_g(y))`` taking points of shape (M, d).
    phi : PotentialField
    xi : ScalarField or array_like
    """
    mesh = phi.mesh
    fv = np.asarray(getattr(f, "values", f), float)
    xv = np.asarray(getattr(xi, "values", xi), float)
    y = phi.grad
    if callable(g) or isinstance(g, tuple):
        g_fn, grad_g_fn = g
        g_at, gg_at = g_fn(y), grad_g_fn(y)
    else:
        tmesh = g.domain.mesh
        g_at = tmesh.interpolate(g.values, y)
        gg_at = tmesh.interpolate(tmesh.gradient(g.values), y)
    Hinv = np.linalg.inv(phi.hess.values)
    gx = mesh.gradient(xv)
    Hx = mesh.hessian(xv)
    lhs = fv * (np.einsum("nij,nji->n", Hinv, Hx) + np.sum(gg_at * gx, axis=1) / g_at)
    rhs = mesh.divergence(fv[:, None] * np.einsum("nij,nj->ni", Hinv, gx))
    m = _interior_mask(mesh, layers)
    return float(np.sqrt(np.sum(mesh.volumes[m] * (lhs - rhs)[m] ** 2)))


def cofactor(H):
    """Cofactor matrix ``det(H) H^{-1}`` of 2x2 (or 1x1) matrices."""
    H = np.asarray(H, float)
    if H.shape[-1] == 1:
        return np.ones_like(H)
    C = np.empty_like(H)
    C[:, 0, 0], C[:, 1, 1] = H[:, 1, 1], H[:, 0, 0]
    C[:, 0, 1], C[:, 1, 0] = -H[:, 1, 0], -H[:, 0, 1]
    return C


def cofactor_divergence(phi):
    """Row-wise divergence of the cofactor matrix of the (unclamped) Hessian."""
    mesh = phi.mesh
    C = cofactor(phi.hess_raw)
    out = np.stack([mesh.divergence(C[:, k, :]) for k in range(mesh.dim)], axis=1)
    return out


def boundary_normal_residual(phi, source, target, collar=None):
    """Largest angle between ``n_*(grad phi(x))`` and the normalised
    ``(D^2 phi(x))^{-1} n(x)`` over boundary faces of ``source``.

    Raises
    ------
    RangeError
        ``grad phi(x)`` is farther than ``collar`` from the target boundary.
    """
    mesh = phi.mesh
    bd = mesh.boundary
    grad_b = mesh.boundary_values(phi.grad)
    H_b = mesh.boundary_values(phi.hess.values.reshape(mesh.n, -1)).reshape(-1, mesh.dim, mesh.dim)
    collar = 5 * max(mesh.h, target.mesh.h) if collar is None else collar
    omega = target.defining_function(grad_b)
    far = np.abs(omega) > collar
    if np.any(far):
        k = int(np.nonzero(far)[0][0])
        raise RangeError(f"boundary face {k}: grad phi lands {omega[k]:.3g} from the target boundary")
    n_star = target.outer_normal(grad_b)
    v = np.linalg.solve(H_b, bd.normals[..., None])[..., 0]
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if mesh.dim == 1:
        return float(np.max(np.abs(n_star - v)))
    cross = n_star[:, 0] * v[:, 1] - n_star[:, 1] * v[:, 0]
    dot = np.sum(n_star * v, axis=1)
    return float(np.max(np.abs(np.arctan2(np.abs(cross), dot))))


__all__ = [
    "EllipticProblem", "ResponseField", "assemble", "stiffness", "deflated_pcg", "solve",
    "solve_1d_closed_form", "solve_response", "project_rhs", "response_rhs", "energy",
    "load_pairing", "magic_residual", "cofactor", "cofactor_divergence",
    "boundary_normal_residual",
]
