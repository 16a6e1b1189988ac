"""Second variation of the squared transport distance along multiplicative
perturbations ``f_t = f (1 + t h)``, ``g_t = g (1 + t k)``.

The closed expression is ``int <(D^2 phi)^{-1} grad xi, grad xi> f`` where
``xi`` solves the linearised problem with source ``(k o grad phi - h) f``.
It is compared with the central second difference of ``d_2(f_t, g_t)^2``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MeanError
from .linear_response import assemble, energy, project_rhs, solve
from .ot1d import d2_1d

MACHINE_FLOOR = 1e3 * np.finfo(float).eps


@dataclass
class SecondVariationReport:
    """Closed-form value, finite-difference values and their gaps.

    ``fd_value`` uses step ``dt``; ``fd_half`` (when present) uses ``dt/2``.
    ``gap`` is ``|formula - fd| / max(|fd|, floor)``.
    """

    formula_value: float
    fd_value: float
    dt: float
    gap: float
    fd_half: float | None = None
    gap_half: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"formula_value": self.formula_value, "fd_value": self.fd_value, "dt": self.dt,
                "gap": self.gap, "fd_half": self.fd_half, "gap_half": self.gap_half,
                **self.meta}


def _weighted_mean(vals, dens):
    return float(np.dot(np.asarray(vals, float) * dens.values, dens.mesh.volumes))


def response_for_perturbation(f, g, h, k, phi, mean_tol=1e-8, method="auto"):
    """Solve for ``xi`` with source ``(k(grad phi) - h) f`` and no-flux boundary.

    Parameters
    ----------
    f, g : DensityGrid
    h : array_like on the source mesh
    k : array_like on the target mesh, or a callable of target points
    phi : PotentialField between ``f`` and ``g``
    """
    hv = np.asarray(getattr(h, "values", h), float)
    if abs(_weighted_mean(hv, f)) > mean_tol:
        raise MeanError(f"int h f = {_weighted_mean(hv, f):.3g} is not zero")
    if callable(k):
        k_at = np.asarray(k(*phi.grad.T), float)
    else:
        kv = np.asarray(getattr(k, "values", k), float)
        if abs(_weighted_mean(kv, g)) > mean_tol:
            raise MeanError(f"int k g = {_weighted_mean(kv, g):.3g} is not zero")
        k_at = g.mesh.interpolate(kv, phi.grad)
    p = (k_at - hv) * f.values
    p = project_rhs(p, f)
    prob = assemble(f, phi.hess, p, check=False)
    return solve(prob, method)


def second_variation(f, g, h, k, phi, xi=None, mean_tol=1e-8):
    """``int <(D^2 phi)^{-1} grad xi, grad xi> f``.

    When ``xi`` carries its assembled problem the discrete energy
    ``xi^T K xi`` is returned, which is the consistent quadrature for the
    finite-volume solution.  Otherwise ``xi`` is solved for first.

    Raises
    ------
    MeanError
        ``int h f`` or ``int k g`` is not zero.
    """
    hv = np.asarray(getattr(h, "values", h), float)
    if abs(_weighted_mean(hv, f)) > mean_tol:
        raise MeanError(f"int h f = {_weighted_mean(hv, f):.3g} is not zero")
    if not callable(k):
        kv = np.asarray(getattr(k, "values", k), float)
        if abs(_weighted_mean(kv, g)) > mean_tol:
            raise MeanError(f"int k g = {_weighted_mean(kv, g):.3g} is not zero")
    if xi is None or getattr(xi, "problem", None) is None:
        xi = response_for_perturbation(f, g, h, k, phi, mean_tol)
    return energy(xi.problem, xi.values)


def exact_1d_backend(f, g):
    """Squared distance by exact quantile quadrature."""
    return d2_1d(f, g) ** 2


def fd_second_derivative(path_f, path_g, dt, d2_backend=None):
    """``[d(dt)^2 + d(-dt)^2 - 2 d(0)^2] / (2 dt^2)`` along two paths.

    ``d2_backend(f, g)`` returns the squared distance; it defaults to the
    exact 1D backend.  The ``t = 0`` problem is solved first so that
    warm-started backends start from it.
    """
    backend = exact_1d_backend if d2_backend is None else d2_backend
    s0 = backend(path_f.density(0.0), path_g.density(0.0))
    sp_ = backend(path_f.density(dt), path_g.density(dt))
    sm = backend(path_f.density(-dt), path_g.density(-dt))
    return (sp_ + sm - 2.0 * s0) / (2.0 * dt * dt)


def relative_gap(formula, fd, floor=MACHINE_FLOOR):
    return abs(formula - fd) / max(abs(fd), floor)


def validate(formula_value, fd_value, dt, fd_half=None, floor=MACHINE_FLOOR, **meta):
    """Bundle the values into a :class:`SecondVariationReport`."""
    gap = relative_gap(formula_value, fd_value, floor)
    gap_half = None if fd_half is None else relative_gap(formula_value, fd_half, floor)
    return SecondVariationReport(float(formula_value), float(fd_value), float(dt), float(gap),
                                 None if fd_half is None else float(fd_half),
                                 None if gap_half is None else float(gap_half), dict(meta))


__all__ = [
    "SecondVariationReport", "second_variation", "response_for_perturbation",
    "fd_second_derivative", "exact_1d_backend", "validate", "relative_gap",
]
