import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otlab.domain import Domain
from otlab.errors import DimensionError, EmptyInput, FloorError, MeshMismatch, RangeError
from otlab.measures import (DensityGrid, ScalarField, SpdField, norms, quadrature,
                            read_density, read_field, write_density, write_field)

DOMAINS = [
    ("interval", lambda: Domain.interval(-1.0, 2.0, 101)),
    ("rectangle", lambda: Domain.rectangle((0, 0), (2, 1), (21, 11))),
    ("disk", lambda: Domain.disk(1.0, shape=(12, 48))),
    ("ellipse", lambda: Domain.ellipse((2.0, 0.5), (0.3, -0.2), shape=(12, 48))),
    ("disk-cartesian", lambda: Domain.disk(1.0, shape=(40, 40), mesh="cartesian")),
    ("ellipse-cartesian", lambda: Domain.ellipse((2.0, 0.5), shape=(60, 20), mesh="cartesian")),
]


def test_quadrature_constant(unit):
    assert quadrature(ScalarField(unit, np.ones(unit.mesh.n))) == pytest.approx(1.0, abs=1e-14)


def test_quadrature_weighted_by_density(unit):
    f = DensityGrid(unit, 1 + unit.mesh.x**3)
    assert quadrature(ScalarField(unit, np.ones(unit.mesh.n)), f) == pytest.approx(1.0, abs=1e-8)


def test_quadrature_x_squared():
    dom = Domain.interval(0, 1, 1001)
    assert quadrature(ScalarField(dom, dom.mesh.x**2)) == pytest.approx(1 / 3, abs=1e-5)


def test_quadrature_mesh_mismatch(unit):
    other = DensityGrid.uniform(Domain.interval(0, 1, 51))
    with pytest.raises(MeshMismatch):
        quadrature(ScalarField(unit, np.ones(unit.mesh.n)), other)


@pytest.mark.parametrize("c", [0.0, 2.5, -3.0])
def test_norms_constant(unit, c):
    rep = norms(ScalarField(unit, np.full(unit.mesh.n, c)), alpha=0.5)
    assert rep.sup_norm == abs(c)
    assert rep.holder_seminorm == 0.0


def test_holder_linear(unit):
    rep = norms(ScalarField(unit, unit.mesh.x), alpha=1.0)
    assert rep.holder_seminorm == pytest.approx(1.0, abs=1e-9)


def test_holder_sqrt():
    dom = Domain.interval(0, 1, 2000)
    rep = norms(ScalarField(dom, np.sqrt(dom.mesh.x)), alpha=0.5)
    assert rep.holder_seminorm == pytest.approx(1.0, abs=2e-2)
    assert rep.pairs_sampled == 2000 * 1999 // 2


def test_holder_sampled_above_cap():
    dom = Domain.interval(0, 1, 3001)
    rep = norms(ScalarField(dom, dom.mesh.x), alpha=1.0)
    assert rep.pairs_sampled == 10**6
    assert rep.holder_seminorm == pytest.approx(1.0, abs=1e-9)


def test_norms_errors(unit):
    with pytest.raises(EmptyInput):
        ScalarField(unit, np.array([]))
    with pytest.raises(RangeError):
        norms(ScalarField(unit, unit.mesh.x), ps=(0.5,))
    with pytest.raises(DimensionError):
        ScalarField(unit, np.ones(7))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_lp_monotone_in_p(coef):
    dom = Domain.interval(0, 1, 201)
    x = dom.mesh.x
    u = coef[0] + coef[1] * np.sin(3 * x) + coef[2] * x**2
    lp = norms(ScalarField(dom, u), ps=(1, 2, 4, np.inf)).lp_norms
    vals = [lp[p] for p in (1, 2, 4, np.inf)]
    assert all(a <= b * (1 + 1e-9) + 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("name,make", DOMAINS)
def test_domain_invariants(name, make):
    dom = make()
    mesh = dom.mesh
    assert mesh.volumes.sum() == pytest.approx(dom.measure, rel=1e-10)
    pts = mesh.points[mesh.active]
    omega = dom.defining_function(pts)
    assert np.all(omega <= mesh.h)
    interior = omega < -mesh.h
    assert interior.any()
    if dom.dim == 1:
        outside = np.array([[mesh.x[0] - 0.5], [mesh.x[-1] + 0.5]])
    else:
        c, r = pts.mean(axis=0), dom.diameter
        outside = c + np.array([[r, 0.0], [0.0, -r], [-r, r]])
    assert np.all(dom.defining_function(outside) > 0)
    bd = mesh.boundary
    assert np.allclose(np.linalg.norm(bd.normals, axis=1), 1.0)
    assert np.all(np.abs(dom.defining_function(bd.points)) <= mesh.h)


def test_density_normalisation_and_floor(unit):
    f = DensityGrid(unit, 3 + unit.mesh.x)
    assert f.mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(FloorError):
        DensityGrid(unit, 1 + unit.mesh.x, floor=0.9)
    assert DensityGrid.from_function(unit, lambda x: 2 * x).mass == pytest.approx(1.0, abs=1e-12)


def test_spd_clamp_idempotent_preserves_eigenvectors():
    dom = Domain.disk(1.0, shape=(6, 24))
    rng = np.random.default_rng(1)
    B = rng.normal(size=(dom.mesh.n, 2, 2))
    H = B @ np.swapaxes(B, 1, 2) + 1e-3 * np.eye(2)
    once = SpdField(dom, H).clamp(0.1, 2.0)
    twice = once.clamp(0.1, 2.0)
    assert np.allclose(once.values, twice.values, atol=1e-13)
    assert twice.clamp_rate == 0.0
    w, _ = np.linalg.eigh(once.values)
    assert w.min() >= 0.1 - 1e-12 and w.max() <= 2.0 + 1e-12
    _, V0 = np.linalg.eigh(H)
    _, V1 = np.linalg.eigh(once.values)
    distinct = np.abs(np.diff(np.clip(np.linalg.eigvalsh(H), .1, 2.0), axis=1))[:, 0] > 1e-6
    cos = np.abs(np.sum(V0[:, :, 0] * V1[:, :, 0], axis=1))
    assert np.allclose(cos[distinct], 1.0, atol=1e-8)


@pytest.mark.parametrize("name,make", DOMAINS)
def test_file_roundtrip(tmp_path, name, make):
    dom = make()
    vals = 1.5 + np.cos(np.arange(dom.mesh.n))
    f = DensityGrid(dom, vals)
    write_density(tmp_path / "f.dat", f)
    g = read_density(tmp_path / "f.dat", normalize=False)
    assert g.mesh.same_as(f.mesh)
    assert np.array_equal(g.values, f.values)
    assert np.allclose(read_density(tmp_path / "f.dat").values, f.values, rtol=1e-14)
    write_field(tmp_path / "h.dat", ScalarField(dom, vals - 2))
    assert np.array_equal(read_field(tmp_path / "h.dat").values, vals - 2)
