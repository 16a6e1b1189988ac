import numpy as np
import pytest
from scipy import stats

from otlab.domain import Domain
from otlab.errors import ConfigError, ConvexityError, DimensionError, ExponentError
from otlab.experiments import (StabilityReport, brascamp_lieb_check, brascamp_lieb_suite,
                               boundary_normal_identity, cofactor_study, lp_distance, magic_study,
                               make_family, multiplicative_family, normalized_potential,
                               plan_distance_1d, sharpness_report, smooth_family, thm11_sweep,
                               thm12_sweep, thm13_sweep, translation_family)
from otlab.measures import DensityGrid, ScalarField
from otlab.plotdata import csv_text, emit_plotdata, header_text, svg_text


def test_translation_ratios_are_one():
    rep = thm11_sweep(translation_family())
    assert np.allclose(rep.ratios, 1.0, atol=1e-6)
    assert np.allclose(rep.column("ratio_plan"), 1.0, atol=1e-2)
    assert not any(r["flagged"] for r in rep.rows)


def test_zero_rhs_row_has_no_ratio():
    rep = thm11_sweep(translation_family(sizes=(0.0, 0.1)))
    zero = rep.rows[0]
    assert zero["rhs"] == 0.0 and zero["ratio"] is None and zero["lhs"] == 0.0
    assert len(rep.ratios) == 1


def test_rows_sorted_by_size():
    rep = thm11_sweep(translation_family(sizes=(0.2, 0.05, 0.1)))
    assert [r["size"] for r in rep.rows] == [0.05, 0.1, 0.2]
    assert [r["index"] for r in rep.rows] == [1, 2, 0]


@pytest.mark.parametrize("scale", [0.5, 3.0])
def test_plan_ratio_scale_invariant(scale):
    base = thm11_sweep(multiplicative_family(sizes=(0.1, 0.3)))
    scaled = thm11_sweep(multiplicative_family(sizes=(0.1, 0.3), scale=scale))
    assert np.allclose(base.column("ratio_plan"), scaled.column("ratio_plan"), rtol=1e-8)


def test_threads_do_not_change_rows():
    fam = multiplicative_family(sizes=(0.05, 0.2, 0.4))
    assert thm11_sweep(fam, threads=1).rows == thm11_sweep(fam, threads=3).rows


def test_thm12_normalization():
    rep = thm12_sweep(make_family("piecewise"))
    assert np.all(rep.column("normalization_error") <= 1e-12)
    assert np.all(np.isfinite(rep.ratios))
    assert np.all(rep.column("ratio_grad") > 0)


def test_normalized_potential_uniform(uniform):
    phi, T, err = normalized_potential(uniform, uniform)
    assert err <= 1e-14
    x = uniform.mesh.x
    assert np.allclose(phi - 0.5 * x**2, phi[0], atol=1e-8)
    assert np.allclose(T.values, uniform.mesh.x, atol=1e-10)


def test_thm13_ratios_bounded():
    rep = thm13_sweep(smooth_family(), alpha=0.5)
    assert rep.backend["p"] == pytest.approx(2.0)
    r = rep.ratios
    assert len(r) == 5 and np.all(r > 0)
    assert r.max() / r.min() <= 3


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
def test_thm13_exponent_error(alpha):
    with pytest.raises(ExponentError):
        thm13_sweep(smooth_family(sizes=(0.1,)), alpha=alpha)


def test_sweep_rejects_other_backends():
    with pytest.raises(ConfigError, match="backend"):
        thm11_sweep(translation_family(sizes=(0.1,)), backend="sinkhorn")


def test_make_family_errors():
    with pytest.raises(ConfigError, match="family"):
        make_family("nope")
    with pytest.raises(ConfigError, match="family.bogus"):
        make_family("smooth", bogus=3)
    fam = make_family("smooth", seed=4, modes=2)
    again = make_family(fam.descriptor["name"], fam.descriptor["seed"], **{
        k: v for k, v in fam.descriptor["params"].items() if k in ("sizes", "n", "scale", "modes")})
    assert np.array_equal(fam.instances[-1].f1.values, again.instances[-1].f1.values)


def test_lp_distance_consistent():
    dom = Domain.interval(0, 1, 201)
    f = DensityGrid.uniform(dom)
    g = DensityGrid(dom, 1 + 0.5 * np.cos(np.pi * dom.mesh.x))
    # p = 2 closed form against the Gauss-Legendre route through p close to 2
    assert lp_distance(f, g, 2) == pytest.approx(0.5 / np.sqrt(2), rel=1e-4)
    assert lp_distance(f, g, 2 + 1e-9) == pytest.approx(lp_distance(f, g, 2), rel=1e-6)
    assert lp_distance(f, g, 1) <= lp_distance(f, g, 2) <= lp_distance(f, g, 4)


def test_plan_distance_translation():
    dom = Domain.interval(0, 1, 401)
    u = DensityGrid.uniform(dom)
    v = DensityGrid.uniform(Domain.interval(0.3, 1.3, 401))
    assert plan_distance_1d(u, u, u, v) == pytest.approx(0.3, abs=1e-10)
    assert plan_distance_1d(u, u, u, u) == 0.0


def test_sharpness_rows():
    rep = sharpness_report()
    # rows ascend in eps, so the ratio must fall along them
    r = rep.column("ratio")
    assert np.all(np.diff(r) < 0)
    assert rep.theorem == "1.3-control"
    assert [row["index"] for row in rep.rows] == [3, 2, 1, 0]


def test_brascamp_lieb_analytic():
    dom = Domain.interval(0, 1, 2001)
    x = dom.mesh.x
    res = brascamp_lieb_check(ScalarField(dom, 0.5 * x**2), ScalarField(dom, x),
                              hess=np.ones((dom.mesh.n, 1, 1)))
    assert res["lhs"] == pytest.approx(stats.truncnorm(0, 1).var(), abs=1e-6)
    assert res["rhs"] == pytest.approx(1.0, abs=1e-12)
    assert res["clamp_rate"] == 0.0


def test_brascamp_lieb_fd_hessian():
    dom = Domain.interval(0, 1, 2001)
    x = dom.mesh.x
    res = brascamp_lieb_check(ScalarField(dom, 0.5 * x**2), ScalarField(dom, x))
    assert res["margin"] > 0.9


def test_brascamp_lieb_concave_raises():
    dom = Domain.interval(0, 1, 101)
    x = dom.mesh.x
    with pytest.raises(ConvexityError):
        brascamp_lieb_check(ScalarField(dom, -x**2), ScalarField(dom, x))


def test_brascamp_lieb_suite_small():
    res = brascamp_lieb_suite(20, seed=1, shape=(8, 32))
    assert min(r["margin"] for r in res) >= -1e-6
    assert res == brascamp_lieb_suite(20, seed=1, shape=(8, 32))


def test_identity_studies():
    m = magic_study()
    assert min(m["slopes"]) >= 0.8
    ctrl = magic_study(consistent=False)
    assert max(ctrl["slopes"]) < 0.5
    c = cofactor_study()
    assert max(c["quadratic"]) <= 1e-10
    assert min(c["slopes"]) >= 0.8
    assert boundary_normal_identity() <= 1e-8


def test_sweep_is_one_dimensional():
    fam = translation_family(sizes=(0.1,))
    d = DensityGrid.uniform(Domain.disk(1.0, shape=(4, 16)))
    fam.instances[0].g1 = d
    with pytest.raises(DimensionError):
        thm11_sweep(fam)


# plot data -------------------------------------------------------------------

def test_empty_report_csv():
    text, cols = csv_text(StabilityReport("1.1", [], {}))
    assert text == "size,lhs,rhs,ratio\n"
    assert header_text(cols).splitlines()[0].startswith("size: ")


def test_csv_round_trip(tmp_path):
    rep = thm11_sweep(translation_family(sizes=(0.0, 0.1)))
    path = str(tmp_path / "t.csv")
    written = emit_plotdata(rep, "csv", path)
    assert written == [path, path + ".header"]
    lines = open(path).read().splitlines()
    cols = lines[0].split(",")
    assert cols[:2] == ["size", "index"]
    first = dict(zip(cols, lines[1].split(",")))
    assert first["ratio"] == "" and first["flagged"] == "0"
    assert float(dict(zip(cols, lines[2].split(",")))["lhs"]) == rep.rows[1]["lhs"]
    assert len(open(path + ".header").read().splitlines()) == len(cols)


def test_svg_log_axis():
    rep = sharpness_report()
    svg = svg_text(rep, x="size", y="ratio", logx=True, title="control")
    assert svg.startswith("<svg") and "log10 size" in svg
    assert svg.count("<circle") == 4


def test_svg_skips_nonpositive_on_log_axis():
    rep = thm11_sweep(translation_family(sizes=(0.0, 0.1, 0.2)))
    assert svg_text(rep, logx=True).count("<circle") == 2
