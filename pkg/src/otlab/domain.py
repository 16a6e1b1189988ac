"""Convex domains with a signed-distance defining function and a mesh."""

import numpy as np

from .errors import DomainError, RangeError
from .mesh import BoundaryFaces, CartesianMesh, IntervalMesh, PolarMesh, TensorMesh

KINDS = ("interval", "disk", "ellipse", "rectangle")


class Domain:
    """A convex domain together with its mesh.

    Parameters
    ----------
    kind : {"interval", "disk", "ellipse", "rectangle"}
    params : dict
        ``a, b`` for intervals; ``center, radii`` for disks and ellipses;
        ``lo, hi`` for rectangles.
    mesh : Mesh

    Notes
    -----
    The defining function is the signed distance, evaluated through the
    support function ``h``: ``omega(x) = max_{|n|=1} <n, x> - h(n)``.  It is
    negative inside, positive outside and 1-Lipschitz with unit gradient on
    the boundary.  Its maximiser is the outer normal.
    """

    def __init__(self, kind, params, mesh):
        if kind not in KINDS:
            raise DomainError(f"unknown domain kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self.mesh = mesh
        self.dim = mesh.dim

    # constructors --------------------------------------------------------
    @classmethod
    def interval(cls, a=0.0, b=1.0, n=201):
        return cls("interval", {"a": float(a), "b": float(b)}, IntervalMesh(a, b, n))

    @classmethod
    def rectangle(cls, lo=(0.0, 0.0), hi=(1.0, 1.0), shape=(33, 33)):
        return cls("rectangle", {"lo": list(map(float, lo)), "hi": list(map(float, hi))},
                   TensorMesh(lo, hi, shape))

    @classmethod
    def ellipse(cls, radii=(1.0, 1.0), center=(0.0, 0.0), shape=(16, 64), mesh="polar"):
        """Ellipse with semi-axes ``radii``.

        ``mesh="polar"`` builds a :class:`PolarMesh` with ``shape = (n_r, n_theta)``;
        ``mesh="cartesian"`` builds a :class:`CartesianMesh` over the bounding box
        with ``shape = (n_1, n_2)`` cells.
        """
        radii = np.asarray(radii, float)
        center = np.asarray(center, float)
        if np.any(radii <= 0):
            raise RangeError("radii must be positive")
        kind = "disk" if radii[0] == radii[1] else "ellipse"
        params = {"center": center.tolist(), "radii": radii.tolist(), "mesh": mesh}
        if mesh == "polar":
            m = PolarMesh(center, radii, *shape)
        elif mesh == "cartesian":
            a, b = radii
            th = (np.arange(4 * max(shape)) + 0.5) * 2 * np.pi / (4 * max(shape))
            pts = center + np.column_stack([a * np.cos(th), b * np.sin(th)])
            nrm = np.column_stack([np.cos(th) / a, np.sin(th) / b])
            nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
            area = np.sqrt(a**2 * np.sin(th) ** 2 + b**2 * np.cos(th) ** 2) * (th[1] - th[0])

            def inside(X, Y):
                return ((X - center[0]) / a) ** 2 + ((Y - center[1]) / b) ** 2 < 1

            m = CartesianMesh(center - radii, center + radii, shape, inside,
                              exact_area=np.pi * a * b, boundary=(pts, nrm, area))
        else:
            raise DomainError(f"unknown mesh type {mesh!r}")
        return cls(kind, params, m)

    @classmethod
    def disk(cls, radius=1.0, center=(0.0, 0.0), shape=(16, 64), mesh="polar"):
        return cls.ellipse((radius, radius), center, shape, mesh)

    # geometry ------------------------------------------------------------
    @property
    def measure(self):
        p = self.params
        if self.kind == "interval":
            return p["b"] - p["a"]
        if self.kind == "rectangle":
            return float(np.prod(np.subtract(p["hi"], p["lo"])))
        return float(np.pi * np.prod(p["radii"]))

    @property
    def diameter(self):
        p = self.params
        if self.kind == "interval":
            return p["b"] - p["a"]
        if self.kind == "rectangle":
            return float(np.hypot(*np.subtract(p["hi"], p["lo"])))
        return 2.0 * max(p["radii"])

    def support(self, normals):
        """Support function ``h(n) = sup_{x in Omega} <n, x>``."""
        n = np.atleast_2d(np.asarray(normals, float))
        p = self.params
        if self.kind == "interval":
            return np.where(n[:, 0] > 0, p["b"] * n[:, 0], p["a"] * n[:, 0])
        if self.kind == "rectangle":
            lo, hi = np.asarray(p["lo"]), np.asarray(p["hi"])
            return np.maximum(n[:, 0] * lo[0], n[:, 0] * hi[0]) + np.maximum(
                n[:, 1] * lo[1], n[:, 1] * hi[1])
        a, b = p["radii"]
        return n @ np.asarray(p["center"]) + np.sqrt((a * n[:, 0]) ** 2 + (b * n[:, 1]) ** 2)

    def _argmax_angle(self, x):
        """Angle of the maximising normal for each point (2D)."""
        x = np.atleast_2d(np.asarray(x, float))
        K = 720
        th = (np.arange(K) + 0.5) * 2 * np.pi / K
        nn = np.column_stack([np.cos(th), np.sin(th)])
        vals = x @ nn.T - self.support(nn)[None, :]
        best = th[np.argmax(vals, axis=1)]
        if self.kind == "rectangle":
            return best
        c = np.asarray(self.params["center"])
        a, b = self.params["radii"]
        y = x - c
        if a == b:
            r = np.hypot(y[:, 0], y[:, 1])
            return np.where(r > 0, np.arctan2(y[:, 1], y[:, 0]), best)
        t = best
        for _ in range(30):
            cs, sn = np.cos(t), np.sin(t)
            S = np.sqrt(a**2 * cs**2 + b**2 * sn**2)
            S1 = (b**2 - a**2) * sn * cs / S
            S2 = ((b**2 - a**2) * (cs**2 - sn**2) - S1**2) / S
            F1 = -y[:, 0] * sn + y[:, 1] * cs - S1
            F2 = -y[:, 0] * cs - y[:, 1] * sn - S2
            step = np.where(F2 < 0, F1 / np.where(F2 < 0, F2, -1.0), 0.0)
            t = t - np.clip(step, -0.1, 0.1)
        return t

    def defining_function(self, x):
        """Signed distance to the boundary, negative inside."""
        x = np.asarray(x, float)
        if self.kind == "interval":
            x = x.reshape(-1)
            return np.maximum(self.params["a"] - x, x - self.params["b"])
        x = x.reshape(-1, 2)
        t = self._argmax_angle(x)
        n = np.column_stack([np.cos(t), np.sin(t)])
        return np.sum(n * x, axis=1) - self.support(n)

    def outer_normal(self, x):
        """Gradient of the defining function (unit outer normal on the boundary)."""
        x = np.asarray(x, float)
        if self.kind == "interval":
            x = x.reshape(-1)
            mid = 0.5 * (self.params["a"] + self.params["b"])
            return np.where(x >= mid, 1.0, -1.0)[:, None]
        t = self._argmax_angle(x.reshape(-1, 2))
        return np.column_stack([np.cos(t), np.sin(t)])

    def contains(self, x, tol=0.0):
        return self.defining_function(x) <= tol

    # serialisation -------------------------------------------------------
    def header(self):
        """Key/value description used by the density file format."""
        p = self.params
        out = {"kind": self.kind}
        if self.kind == "interval":
            out.update(a=p["a"], b=p["b"], shape=list(self.mesh.shape))
        elif self.kind == "rectangle":
            out.update(lo=p["lo"], hi=p["hi"], shape=list(self.mesh.shape))
        else:
            out.update(center=p["center"], radii=p["radii"], mesh=p["mesh"],
                       shape=list(self.mesh.shape))
        return out

    @classmethod
    def from_header(cls, hdr):
        kind = hdr["kind"]
        shape = [int(s) for s in hdr["shape"]]
        if kind == "interval":
            return cls.interval(float(hdr["a"]), float(hdr["b"]), shape[0])
        if kind == "rectangle":
            return cls.rectangle(hdr["lo"], hdr["hi"], shape)
        if kind in ("disk", "ellipse"):
            return cls.ellipse(hdr["radii"], hdr["center"], shape, hdr.get("mesh", "polar"))
        raise DomainError(f"unknown domain kind {kind!r}")

    def __repr__(self):
        return f"Domain({self.kind!r}, {self.params}, shape={self.mesh.shape})"


__all__ = ["Domain", "BoundaryFaces", "KINDS"]
