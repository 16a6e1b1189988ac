import numpy as np
import pytest

from otlab.domain import Domain
from otlab.errors import IncompatibleData, NoConvergence, RangeError
from otlab.linear_response import (_interior_mask, assemble, boundary_normal_residual, cofactor_divergence,
                                   energy, load_pairing, magic_residual, solve, solve_response,
                                   stiffness)
from otlab.measures import DensityGrid, PotentialField, ScalarField, SpdField
from otlab.paths import constant_path, linear_path, multiplicative_path


def identity_hess(dom):
    return SpdField(dom, np.broadcast_to(np.eye(dom.dim), (dom.mesh.n, dom.dim, dom.dim)))


@pytest.mark.parametrize("make", [
    lambda: Domain.interval(0, 1, 41),
    lambda: Domain.rectangle((0, 0), (1, 2), (9, 13)),
    lambda: Domain.disk(1.0, shape=(6, 24)),
])
def test_stiffness_symmetric_with_constant_kernel(make):
    dom = make()
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, np.pi, dom.mesh.n)
    lam = rng.uniform(0.25, 1.0, (dom.mesh.n, dom.dim))
    if dom.dim == 1:
        A = lam[:, :, None]
    else:
        R = np.stack([np.stack([np.cos(ang), -np.sin(ang)], -1),
                      np.stack([np.sin(ang), np.cos(ang)], -1)], 1)
        A = np.einsum("nij,nj,nkj->nik", R, lam, R)
    K = stiffness(dom, A)
    assert (K - K.T).nnz == 0 or np.max(np.abs((K - K.T).data)) == 0.0
    assert np.max(np.abs(K @ np.ones(dom.mesh.n))) <= 1e-10 * abs(K).max()
    w = np.linalg.eigvalsh(K.toarray())
    assert w[1] > 1e-8 * w[-1]


def test_strong_anisotropy_reported():
    dom = Domain.disk(1.0, shape=(6, 24))
    A = np.broadcast_to(np.diag([1.0, 1e-4]), (dom.mesh.n, 2, 2))
    p = np.cos(3 * dom.mesh.points[:, 0])
    prob = assemble(ScalarField(dom, np.ones(dom.mesh.n)), identity_hess(dom), p, check=False, A=A)
    with pytest.raises(NoConvergence):
        solve(prob)


def test_zero_data_zero_solution():
    dom = Domain.disk(1.0, shape=(8, 32))
    f = DensityGrid.uniform(dom)
    xi = solve(assemble(f, identity_hess(dom), np.zeros(dom.mesh.n)))
    assert np.max(np.abs(xi.values)) == 0.0


@pytest.mark.parametrize("make", [lambda: Domain.interval(0, 1, 51),
                                  lambda: Domain.disk(1.0, shape=(8, 32))])
def test_incompatible_data(make):
    dom = make()
    with pytest.raises(IncompatibleData):
        assemble(DensityGrid.uniform(dom), identity_hess(dom), np.ones(dom.mesh.n),
                 np.zeros(len(dom.mesh.boundary)))


def test_manufactured_identity_coefficient_refines():
    errs = []
    for n in (16, 32):
        dom = Domain.disk(1.0, shape=(n, 2 * n))
        x = dom.mesh.points
        r2 = np.sum(x**2, axis=1)
        exact = np.cos(np.pi * r2)
        # -lap cos(pi r^2) = 4 pi sin(pi r^2) + 4 pi^2 r^2 cos(pi r^2)
        p = 4 * np.pi * np.sin(np.pi * r2) + 4 * np.pi**2 * r2 * np.cos(np.pi * r2)
        prob = assemble(ScalarField(dom, np.ones(dom.mesh.n)), identity_hess(dom), p, check=False)
        xi = solve(prob)
        vol = dom.mesh.volumes
        ex = exact - np.dot(vol, exact) / vol.sum()
        errs.append(np.sqrt(np.dot(vol, (xi.values - ex) ** 2) / np.dot(vol, ex**2)))
    assert errs[1] < 0.6 * errs[0]
    assert errs[1] < 0.05


def test_energy_identity():
    dom = Domain.ellipse((1.5, 0.8), shape=(12, 48))
    x = dom.mesh.points
    f = DensityGrid(dom, 1 + 0.3 * x[:, 0])
    p = np.sin(2 * x[:, 0]) * f.values
    p = p - np.dot(dom.mesh.volumes, p) / np.dot(dom.mesh.volumes, f.values) * f.values
    prob = assemble(f, identity_hess(dom), p)
    xi = solve(prob)
    assert abs(xi.values @ dom.mesh.volumes) <= 1e-10
    assert load_pairing(prob, xi) == pytest.approx(energy(prob, xi), rel=1e-8)


def test_1d_and_embedded_2d_agree():
    n = 41
    line = Domain.interval(0, 1, n)
    rect = Domain.rectangle((0, 0), (1, 0.5), (n, 7))
    px = np.cos(np.pi * line.mesh.x) + 0.2
    px -= np.dot(line.mesh.volumes, px)
    a1 = 1 + line.mesh.x
    xi1 = solve(assemble(ScalarField(line, a1), identity_hess(line), px), "closed")
    xr = rect.mesh.points[:, 0]
    p2 = np.interp(xr, line.mesh.x, px)
    xi2 = solve(assemble(ScalarField(rect, 1 + xr), identity_hess(rect), p2), "cg")
    ref = np.interp(xr, line.mesh.x, xi1.values)
    assert np.max(np.abs(xi2.values - ref)) <= 1e-6


def test_response_1d_cos():
    dom = Domain.interval(0, 1, 2001)
    f = DensityGrid.uniform(dom)
    x = dom.mesh.x
    phi = PotentialField.from_quadratic(dom, [[1.0]])
    xi = solve_response(multiplicative_path(f, np.cos(np.pi * x)), constant_path(f), phi, 0.0)
    dxi = np.diff(xi.values) / np.diff(x)
    mid = 0.5 * (x[1:] + x[:-1])
    assert np.max(np.abs(dxi - np.sin(np.pi * mid) / np.pi)) <= 1e-5
    assert abs(xi.compatibility) <= 1e-8
    assert abs(xi.raw_compatibility) <= 1e-8


def test_response_stationary_is_zero():
    dom = Domain.disk(1.0, shape=(8, 32))
    f = DensityGrid.uniform(dom)
    phi = PotentialField.from_quadratic(dom, np.eye(2))
    xi = solve_response(constant_path(f), constant_path(f), phi, 0.3)
    assert np.max(np.abs(xi.values)) <= 1e-12


def test_response_2d_compatibility_small():
    dom = Domain.disk(1.0, shape=(12, 48))
    x = dom.mesh.points
    f0 = DensityGrid(dom, 1 + 0.2 * x[:, 0])
    f1 = DensityGrid(dom, 1 - 0.2 * x[:, 1] ** 2)
    phi = PotentialField.from_quadratic(dom, np.eye(2))
    xi = solve_response(linear_path(f0, f1), constant_path(DensityGrid.uniform(dom)), phi, 0.5)
    assert abs(xi.compatibility) <= 1e-8
    assert set(xi.diagnostics()) == {"iterations", "residual", "compatibility",
                                     "raw_compatibility", "clamp_rate"}


def test_magic_quadratic_constant_densities():
    dom = Domain.disk(1.0, shape=(12, 48))
    A = np.array([[2.0, 0.3], [0.3, 0.7]])
    phi = PotentialField.from_quadratic(dom, A)
    x = dom.mesh.points
    xi = np.sin(x[:, 0]) * np.cos(2 * x[:, 1])
    g = (lambda y: np.ones(len(y)), lambda y: np.zeros_like(y))
    f = ScalarField(dom, np.full(dom.mesh.n, np.linalg.det(A)))
    assert magic_residual(f, g, phi, xi) <= 1e-10


def test_cofactor_quadratic_and_cubic():
    hs, cub = [], []
    for n in (12, 24):
        dom = Domain.disk(1.0, shape=(n, 4 * n))
        x = dom.mesh.points
        quad = PotentialField.from_quadratic(dom, [[1.5, 0.2], [0.2, 0.9]])
        assert np.max(np.abs(cofactor_divergence(quad))) <= 1e-12
        c = PotentialField.from_values(dom, x[:, 0] ** 3 / 6 + 0.5 * x[:, 1] ** 2)
        r = np.linalg.norm(cofactor_divergence(c), axis=1)
        m = _interior_mask(dom.mesh, 2)
        # the innermost ring is first order, so measure in L2 where its weight is O(h^2)
        cub.append(np.sqrt(np.sum(dom.mesh.volumes[m] * r[m] ** 2)))
        hs.append(dom.mesh.h)
    assert cub[0] <= 2 * hs[0] and cub[1] <= 2 * hs[1]
    assert cub[1] < 0.6 * cub[0]


def test_boundary_normal_examples():
    disk = Domain.disk(1.0, shape=(16, 64))
    phi = PotentialField.from_quadratic(disk, np.eye(2))
    assert boundary_normal_residual(phi, disk, disk) <= 1e-8
    ell = Domain.ellipse((2.0, 0.5), shape=(16, 64))
    aff = PotentialField.from_quadratic(disk, np.diag([2.0, 0.5]))
    assert boundary_normal_residual(aff, disk, ell) <= disk.mesh.h
    small = Domain.disk(0.5, shape=(16, 64))
    with pytest.raises(RangeError):
        boundary_normal_residual(phi, disk, small)
