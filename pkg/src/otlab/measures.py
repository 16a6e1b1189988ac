"""Densities, fields, quadrature and discrete norms on a meshed domain."""

from dataclasses import dataclass, field

import numpy as np

from .domain import Domain
from .errors import (DimensionError, EmptyInput, FloorError, IoError, MeshMismatch,
                     RangeError, ValidationError)

HOLDER_SEED = 0x5EED
HOLDER_ALL_PAIRS = 2000
HOLDER_SAMPLES = 10**6


def _check_same_mesh(*objs):
    meshes = [o.domain.mesh for o in objs if o is not None]
    for m in meshes[1:]:
        if not meshes[0].same_as(m):
            raise MeshMismatch("fields live on different meshes")


class _Field:
    """Per-node values on a domain; immutable."""

    def __init__(self, domain, values, trailing=()):
        values = np.array(values, dtype=float)
        n = domain.mesh.n
        if values.size == 0:
            raise EmptyInput("empty field")
        try:
            values = values.reshape((n,) + tuple(trailing))
        except ValueError:
            raise DimensionError(
                f"expected {n} nodes with trailing shape {trailing}, got {values.shape}") from None
        values.setflags(write=False)
        self.domain = domain
        self.values = values

    @property
    def mesh(self):
        return self.domain.mesh

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


class ScalarField(_Field):
    def __init__(self, domain, values):
        super().__init__(domain, values)

    @classmethod
    def from_function(cls, domain, fn):
        return cls(domain, fn(*domain.mesh.points.T))


class VectorField(_Field):
    def __init__(self, domain, values):
        super().__init__(domain, values, (domain.dim,))


class SpdField(_Field):
    """Symmetric matrices per node with an ellipticity bracket.

    ``clamp_rate`` is the fraction of active nodes whose spectrum was
    modified by the most recent clamp.
    """

    def __init__(self, domain, values, bracket=(0.0, np.inf), clamp_rate=0.0):
        d = domain.dim
        super().__init__(domain, values, (d, d))
        self.bracket = (float(bracket[0]), float(bracket[1]))
        self.clamp_rate = float(clamp_rate)

    def eigh(self):
        return np.linalg.eigh(self.values)

    def clamp(self, lo, hi):
        """Clip eigenvalues to ``[lo, hi]``; eigenvectors are unchanged."""
        if not 0 <= lo <= hi:
            raise RangeError(f"invalid clamp bracket [{lo}, {hi}]")
        w, V = np.linalg.eigh(0.5 * (self.values + np.swapaxes(self.values, 1, 2)))
        wc = np.clip(w, lo, hi)
        changed = np.any(np.abs(wc - w) > 1e-12 * np.maximum(1.0, np.abs(w)), axis=1)
        act = self.mesh.active
        rate = float(changed[act].mean()) if act.any() else 0.0
        vals = np.einsum("nij,nj,nkj->nik", V, wc, V)
        return SpdField(self.domain, vals, (lo, hi), rate)

    def inverse(self):
        return np.linalg.inv(self.values)


class DensityGrid(_Field):
    """Probability density sampled at the mesh nodes.

    Parameters
    ----------
    domain : Domain
    values : array_like
        Nonnegative node values.
    floor : float
        Lower bound ``a`` checked on nodes with positive volume after
        normalisation.
    normalize : bool
        Divide by the quadrature mass.  Disable only for data that is already
        normalised or deliberately unnormalised (synthetic identities).
    """

    def __init__(self, domain, values, floor=0.0, normalize=True):
        super().__init__(domain, values)
        vals = np.array(self.values)
        act = self.mesh.active
        if np.any(vals[act] < 0) or not np.all(np.isfinite(vals[act])):
            raise ValidationError("density values must be finite and nonnegative")
        vals[~act] = np.where(vals[~act] > 0, vals[~act], 0.0)
        mass = float(np.dot(vals, self.mesh.volumes))
        if mass <= 0:
            raise EmptyInput("density has zero mass")
        if normalize:
            vals = vals / mass
        vals.setflags(write=False)
        self.values = vals
        self.floor = float(floor)
        if floor < 0:
            raise FloorError("floor must be nonnegative")
        if act.any() and vals[act].min() < floor * (1 - 1e-12):
            raise FloorError(f"density minimum {vals[act].min():.3g} below floor {floor:.3g}")

    @property
    def mass(self):
        return float(np.dot(self.values, self.mesh.volumes))

    @property
    def sup(self):
        return float(self.values[self.mesh.active].max())

    @property
    def inf(self):
        return float(self.values[self.mesh.active].min())

    @classmethod
    def from_function(cls, domain, fn, floor=0.0, normalize=True):
        """Sample ``fn(x)`` (1D) or ``fn(x, y)`` (2D) at the nodes."""
        pts = domain.mesh.points
        vals = np.broadcast_to(np.asarray(fn(*pts.T), float), (len(pts),))
        return cls(domain, vals, floor, normalize)

    @classmethod
    def uniform(cls, domain):
        return cls(domain, np.ones(domain.mesh.n))

    def weights(self):
        """Point masses ``values * volumes``."""
        return self.values * self.mesh.volumes


class PotentialField:
    """Brenier potential with gradient and clamped Hessian.

    Attributes
    ----------
    values : ndarray (N,)
    grad : ndarray (N, d)
    hess_raw : ndarray (N, d, d)
        Symmetrised finite-difference Hessian before clamping.
    hess : SpdField
        Hessian after clamping to ``bracket``.
    """

    def __init__(self, domain, values, grad, hess_raw, bracket=(0.0, np.inf)):
        d = domain.dim
        n = domain.mesh.n
        self.domain = domain
        self.values = np.asarray(values, float).reshape(n)
        self.grad = np.asarray(grad, float).reshape(n, d)
        self.hess_raw = np.asarray(hess_raw, float).reshape(n, d, d)
        self.hess = SpdField(domain, self.hess_raw).clamp(*bracket)
        self.bracket = self.hess.bracket
        self.clamp_rate = self.hess.clamp_rate

    @property
    def mesh(self):
        return self.domain.mesh

    @classmethod
    def from_quadratic(cls, domain, A, b=None, bracket=(0.0, np.inf)):
        """``phi(x) = x.A.x / 2 + b.x`` minus its mean, with exact derivatives."""
        A = np.atleast_2d(np.asarray(A, float))
        x = domain.mesh.points
        b = np.zeros(domain.dim) if b is None else np.asarray(b, float)
        vals = 0.5 * np.einsum("ni,ij,nj->n", x, A, x) + x @ b
        vals = vals - quadrature_values(domain.mesh, vals) / domain.mesh.volumes.sum()
        grad = x @ A.T + b
        hess = np.broadcast_to(A, (len(x),) + A.shape)
        return cls(domain, vals, grad, hess, bracket)

    @classmethod
    def from_values(cls, domain, values, grad=None, bracket=(0.0, np.inf)):
        """Build from node values; derivatives by finite differences unless
        ``grad`` is supplied."""
        mesh = domain.mesh
        g = mesh.gradient(values) if grad is None else np.asarray(grad, float)
        H = mesh.jacobian(g)
        H = 0.5 * (H + np.swapaxes(H, 1, 2))
        return cls(domain, values, g, H, bracket)


@dataclass
class NormReport:
    """Discrete norms of a field.  The Hölder value is an estimator over
    ``pairs_sampled`` node pairs and never exceeds the continuum seminorm
    of the interpolant by construction."""

    lp_norms: dict = field(default_factory=dict)
    sup_norm: float = 0.0
    holder_seminorm: float | None = None
    alpha: float | None = None
    pairs_sampled: int = 0


def quadrature_values(mesh, values):
    return float(np.dot(mesh.volumes, values))


def quadrature(fld, density=None):
    """Cell-weighted quadrature ``sum_i vol_i u_i (f_i)``.

    Examples
    --------
    >>> dom = Domain.interval(0, 1, 11)
    >>> quadrature(ScalarField(dom, np.ones(11)))
    1.0
    """
    _check_same_mesh(fld, density)
    vals = np.asarray(fld.values, float)
    if vals.ndim != 1:
        raise DimensionError("quadrature expects a scalar field")
    if density is not None:
        vals = vals * density.values
    return quadrature_values(fld.mesh, vals)


def _pointwise_abs(vals):
    vals = np.asarray(vals, float)
    if vals.ndim == 1:
        return np.abs(vals)
    return np.linalg.norm(vals.reshape(len(vals), -1), axis=1)


def holder_seminorm(points, values, alpha, seed=HOLDER_SEED):
    """Max of ``|u(x)-u(y)| / |x-y|^alpha`` over node pairs.

    All pairs are used up to ``HOLDER_ALL_PAIRS`` nodes; otherwise
    ``HOLDER_SAMPLES`` pairs drawn with a fixed seed.  The result is a lower
    bound for the seminorm of any function interpolating the node values.

    Returns
    -------
    value, pairs : float, int
    """
    pts = np.asarray(points, float).reshape(len(points), -1)
    vals = np.asarray(values, float).reshape(len(pts), -1)
    n = len(pts)
    if n < 2:
        return 0.0, 0
    best = 0.0
    if n <= HOLDER_ALL_PAIRS:
        pairs = n * (n - 1) // 2
        for i in range(n - 1):
            dx = np.linalg.norm(pts[i + 1:] - pts[i], axis=1)
            du = np.linalg.norm(vals[i + 1:] - vals[i], axis=1)
            ok = dx > 0
            if ok.any():
                best = max(best, float(np.max(du[ok] / dx[ok] ** alpha)))
        return best, pairs
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, HOLDER_SAMPLES)
    j = rng.integers(0, n, HOLDER_SAMPLES)
    dx = np.linalg.norm(pts[i] - pts[j], axis=1)
    du = np.linalg.norm(vals[i] - vals[j], axis=1)
    ok = dx > 0
    return float(np.max(du[ok] / dx[ok] ** alpha)), HOLDER_SAMPLES


def norms(fld, ps=(1, 2), alpha=None):
    """L^p norms (Lebesgue, by quadrature), sup norm and Hölder estimator.

    Parameters
    ----------
    fld : ScalarField, VectorField or DensityGrid
    ps : sequence of float
        Exponents ``p >= 1``; ``np.inf`` is allowed.
    alpha : float, optional
        Hölder order in ``(0, 1]``.
    """
    vals = np.asarray(fld.values, float)
    if vals.size == 0:
        raise EmptyInput("empty field")
    mesh = fld.mesh
    act = mesh.active
    mag = _pointwise_abs(vals)
    rep = NormReport(sup_norm=float(mag[act].max()))
    for p in ps:
        if p < 1:
            raise RangeError(f"L^p needs p >= 1, got {p}")
        if np.isinf(p):
            rep.lp_norms[p] = rep.sup_norm
        else:
            rep.lp_norms[p] = float(np.dot(mesh.volumes, mag**p) ** (1.0 / p))
    if alpha is not None:
        if not 0 < alpha <= 1:
            raise RangeError(f"Hölder order must lie in (0, 1], got {alpha}")
        val, pairs = holder_seminorm(mesh.points[act], vals[act], alpha)
        rep.holder_seminorm, rep.alpha, rep.pairs_sampled = val, alpha, pairs
    return rep


# text file format ---------------------------------------------------------

def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(repr(float(x)) if not isinstance(x, (int, np.integer)) else str(x)
                        for x in v)
    return str(v)


def write_density(path, density):
    """Write a density as ``key: value`` header lines, a ``---`` separator and
    row-major node values."""
    hdr = density.domain.header()
    hdr["floor"] = density.floor
    lines = ["# otlab density v1"]
    for k, v in hdr.items():
        if k == "shape":
            v = [int(s) for s in v]
        lines.append(f"{k}: {_fmt(v)}")
    lines.append("---")
    vals = np.asarray(density.values).reshape(density.mesh.shape)
    if vals.ndim == 1:
        vals = vals[None, :]
    body = "\n".join(" ".join(repr(float(x)) for x in row) for row in vals)
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n" + body + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _parse_value(key, text):
    text = text.strip()
    if key in ("kind", "mesh"):
        return text
    parts = text.split()
    nums = [float(p) for p in parts]
    if key == "shape":
        return [int(x) for x in nums]
    if key in ("a", "b", "floor"):
        return nums[0]
    return nums


def _read_text(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if "---" not in text:
        raise ValidationError(f"{path}: missing '---' separator")
    head, body = text.split("---", 1)
    hdr = {}
    for line in head.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ValidationError(f"{path}: malformed header line {line!r}")
        k, v = line.split(":", 1)
        try:
            hdr[k.strip()] = _parse_value(k.strip(), v)
        except ValueError as exc:
            raise ValidationError(f"{path}: bad value for header key {k.strip()!r}") from exc
    for key in ("kind", "shape"):
        if key not in hdr:
            raise ValidationError(f"{path}: header key {key!r} missing")
    dom = Domain.from_header(hdr)
    try:
        vals = np.array(body.split(), dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric node value") from exc
    if vals.size != dom.mesh.n:
        raise DimensionError(f"{path}: expected {dom.mesh.n} values, found {vals.size}")
    return dom, vals, hdr


def read_density(path, normalize=True):
    """Inverse of :func:`write_density`."""
    dom, vals, hdr = _read_text(path)
    return DensityGrid(dom, vals, floor=hdr.get("floor", 0.0), normalize=normalize)


def read_field(path):
    """Read a signed scalar field stored in the density file format."""
    dom, vals, _ = _read_text(path)
    return ScalarField(dom, vals)


def write_field(path, fld):
    """Write a scalar field in the density file format (``floor`` omitted)."""
    lines = ["# otlab density v1"]
    for k, v in fld.domain.header().items():
        lines.append(f"{k}: {_fmt(v)}")
    lines.append("---")
    vals = np.asarray(fld.values).reshape(fld.mesh.shape)
    if vals.ndim == 1:
        vals = vals[None, :]
    body = "\n".join(" ".join(repr(float(x)) for x in row) for row in vals)
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n" + body + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


__all__ = [
    "Domain", "ScalarField", "VectorField", "SpdField", "DensityGrid", "PotentialField",
    "NormReport", "quadrature", "norms", "holder_seminorm", "write_density", "read_density",
    "read_field", "write_field",
]
