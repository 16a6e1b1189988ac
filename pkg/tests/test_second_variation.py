import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from otlab.domain import Domain
from otlab.errors import MeanError
from otlab.measures import DensityGrid, PotentialField
from otlab.ot_discrete import DebiasedSinkhorn, hessian_bracket
from otlab.paths import center, multiplicative_path
from otlab.second_variation import (fd_second_derivative, relative_gap, response_for_perturbation,
                                    second_variation, validate)

TARGET = 1 / (2 * np.pi**2)


@pytest.fixture(scope="module")
def line():
    dom = Domain.interval(0, 1, 2001)
    f = DensityGrid.uniform(dom)
    return dom, f, PotentialField.from_quadratic(dom, [[1.0]])


def test_zero_perturbation(line):
    dom, f, phi = line
    z = np.zeros(dom.mesh.n)
    assert second_variation(f, f, z, z, phi) == 0.0
    fd = fd_second_derivative(multiplicative_path(f, z), multiplicative_path(f, z), 1e-2)
    assert abs(fd) <= 1e-12
    assert validate(0.0, fd, 1e-2).gap <= 1e-8


@pytest.mark.parametrize("side", ["source", "target"])
def test_cosine_perturbation(line, side):
    dom, f, phi = line
    cos = np.cos(np.pi * dom.mesh.x)
    z = np.zeros(dom.mesh.n)
    h, k = (cos, z) if side == "source" else (z, cos)
    val = second_variation(f, f, h, k, phi)
    fd = fd_second_derivative(multiplicative_path(f, h), multiplicative_path(f, k), 1e-2)
    assert val == pytest.approx(TARGET, abs=1e-4)
    assert fd == pytest.approx(TARGET, abs=1e-5)
    assert validate(val, fd, 1e-2).gap <= 1e-3


def test_linear_tilt_closed_form(line):
    """f_t = 1 + t c (x - 1/2) on [0, 1]: quantiles solve a quadratic."""
    dom, f, phi = line
    c = 1.0
    h = c * (dom.mesh.x - 0.5)
    val = second_variation(f, f, h, np.zeros(dom.mesh.n), phi)
    assert val == pytest.approx(c**2 / 120, abs=1e-4)
    t, s, x = sp.symbols("t s x", real=True)
    # F_t(x) = x + t c (x^2 - x) / 2; invert and integrate (F_t^{-1}(s) - s)^2 numerically
    d2 = []
    for tv in (-1e-2, 0.0, 1e-2):
        if tv == 0.0:
            d2.append(0.0)
            continue
        q = sp.lambdify(s, sp.solve(sp.Eq(x + tv * c * (x**2 - x) / 2, s), x)[0])
        sg = (np.arange(200000) + 0.5) / 200000
        qv = np.real(np.asarray(q(sg), complex))
        if np.any((qv < -1e-9) | (qv > 1 + 1e-9)):
            q = sp.lambdify(s, sp.solve(sp.Eq(x + tv * c * (x**2 - x) / 2, s), x)[1])
            qv = np.real(np.asarray(q(sg), complex))
        d2.append(np.mean((qv - sg) ** 2))
    exact_fd = (d2[0] + d2[2] - 2 * d2[1]) / (2 * 1e-4)
    assert val == pytest.approx(exact_fd, abs=1e-4)


def test_mean_error(line):
    dom, f, phi = line
    with pytest.raises(MeanError):
        second_variation(f, f, np.ones(dom.mesh.n), np.zeros(dom.mesh.n), phi)
    with pytest.raises(MeanError):
        second_variation(f, f, np.zeros(dom.mesh.n), np.ones(dom.mesh.n), phi)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_nonnegative_and_bilinear(coef):
    dom = Domain.interval(0, 1, 401)
    x = dom.mesh.x
    f = DensityGrid(dom, 1 + 0.3 * np.sin(2 * x))
    g = DensityGrid.uniform(dom)
    phi = PotentialField.from_values(dom, 0.5 * x**2, x[:, None])
    h = center(coef[0] * np.cos(np.pi * x) + coef[1] * x**2, f)
    k = center(coef[2] * np.sin(3 * x) + coef[3] * x, g)
    val = second_variation(f, g, h, k, phi)
    assert val >= -1e-12
    for s in (0.5, 2.0):
        assert second_variation(f, g, s * h, s * k, phi) == pytest.approx(s * s * val, rel=1e-8,
                                                                          abs=1e-14)


def test_zero_gradient_forces_zero_value(line):
    dom, f, phi = line
    xi = response_for_perturbation(f, f, np.zeros(dom.mesh.n), np.zeros(dom.mesh.n), phi)
    assert np.linalg.norm(np.diff(xi.values)) <= 1e-6
    assert second_variation(f, f, np.zeros(dom.mesh.n), np.zeros(dom.mesh.n), phi, xi) <= 1e-10


def test_callable_target_perturbation(line):
    dom, f, phi = line
    val = second_variation(f, f, np.zeros(dom.mesh.n), lambda y: np.cos(np.pi * y), phi)
    assert val == pytest.approx(TARGET, abs=1e-4)


def test_relative_gap_floor():
    assert relative_gap(1.0, 0.0) == pytest.approx(1.0 / (1e3 * np.finfo(float).eps))
    rep = validate(1.0, 1.1, 1e-2, fd_half=1.01, n=64)
    assert rep.gap == pytest.approx(0.1 / 1.1)
    assert rep.gap_half == pytest.approx(0.01 / 1.01)
    assert rep.to_dict()["n"] == 64


@pytest.mark.slow
def test_richardson_pair_2d():
    n = 32
    x1, x2 = sp.symbols("x1 x2")
    xs = 0.1 * (1 - x1**2 - x2**2) ** 2 * (x1 + x2**2 / 2)
    r = sp.lambdify((x1, x2), sp.diff(sp.diff(xs, x1) / 2, x1) + sp.diff(2 * sp.diff(xs, x2), x2))
    src = Domain.disk(1.0, shape=(n, 2 * n))
    tgt = Domain.ellipse((2.0, 0.5), shape=(n, 2 * n))
    f, g = DensityGrid.uniform(src), DensityGrid.uniform(tgt)
    phi = PotentialField.from_quadratic(src, np.diag([2.0, 0.5]),
                                        bracket=hessian_bracket(src, 4.0, 1 / np.pi, 1 / np.pi))
    h = center(r(*src.mesh.points.T) + 0.25 * src.mesh.points[:, 1], f)
    k = center(0.5 * tgt.mesh.points[:, 1], g)
    val = second_variation(f, g, h, k, phi)
    cs = Domain.disk(1.0, shape=(n, n), mesh="cartesian")
    ct = Domain.ellipse((2.0, 0.5), shape=(2 * n, n // 2), mesh="cartesian")
    fc, gc = DensityGrid.uniform(cs), DensityGrid.uniform(ct)
    hc = center(r(*cs.mesh.points.T) + 0.25 * cs.mesh.points[:, 1], fc)
    pf = multiplicative_path(fc, hc)
    pg = multiplicative_path(gc, center(0.5 * ct.mesh.points[:, 1], gc))
    backend = DebiasedSinkhorn((2 / n) ** 2, tol=1e-10)
    fd1 = fd_second_derivative(pf, pg, 1e-2, backend)
    fd2 = fd_second_derivative(pf, pg, 2e-2, backend)
    gap = 0.5 * (abs(fd1 - val) + abs(fd2 - val))
    assert abs(fd1 - fd2) <= 0.25 * gap
    assert validate(val, fd1, 1e-2).gap <= 0.1
