import math

import numpy as np
import pytest

from cssnorm import gauge as ga
from cssnorm import grid as gr
from cssnorm import radial as rd
from cssnorm.errors import NotRadial

from conftest import gaussian

H = lambda s: (1 - np.exp(-s * s)) / 4


@pytest.fixture(scope="module")
def gprof():
    return rd.radial_sample(lambda r: np.exp(-r * r / 2), 10.0, 4001)


def test_h_zero():
    z = rd.radial_sample(np.zeros_like, 5.0, 101)
    assert np.all(rd.radial_h(z).values == 0)
    assert np.all(rd.radial_cs_potential(z).values == 0)
    assert rd.radial_cs_energy(z) == 0.0


def test_h_gaussian(gprof):
    h = rd.radial_h(gprof)
    for s in (1.0, 2.0):
        i = int(round(s / gprof.dr))
        assert abs(h.values[i] - H(s)) < 1e-6
    assert h.values[0] == 0.0


def test_h_trapezoid_option(gprof):
    h = rd.radial_h(gprof, "trapezoid")
    i = int(round(1.0 / gprof.dr))
    assert abs(h.values[i] - H(1.0)) < 1e-5
    with pytest.raises(ValueError):
        rd.radial_h(gprof, "boole")


def test_h_nondecreasing():
    rng = np.random.default_rng(1)
    u = rd.RadialField(3.0, 301, rng.normal(size=301))
    assert np.all(np.diff(rd.radial_h(u, "trapezoid").values) >= 0)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_h_polynomial_exactness(m):
    u = rd.radial_sample(lambda r: r ** m, 2.0, 2001)
    s = u.r
    np.testing.assert_allclose(rd.radial_h(u).values, s ** (2 * m + 2) / (4 * m + 4), atol=1e-8)


def test_potential_gaussian(gprof):
    V = rd.radial_cs_potential(gprof)
    h = rd.radial_h(gprof).values
    i = int(round(1.0 / gprof.dr))
    # the second term of V at r = 1
    assert h[i] ** 2 / 1.0 == pytest.approx(((1 - math.exp(-1)) / 4) ** 2, abs=1e-8)
    # spec quotes 0.024979; the exact value of the expression is 0.0249735
    assert ((1 - math.exp(-1)) / 4) ** 2 == pytest.approx(0.024979, abs=1e-5)
    # the tail vanishes at r_max
    assert V.values[-1] == pytest.approx(h[-1] ** 2 / gprof.r_max ** 2, rel=1e-12)
    # finite limit at the origin
    assert np.isfinite(V.values[0]) and V.values[0] > 0


def test_potential_matches_2d_gauge():
    """V = A0 + A1^2 + A2^2 for radial fields (Eq. (BHS))."""
    g = gr.make_grid(8.0, 128)
    u = gaussian(g)
    pot = ga.gauge_fields(u).potential
    prof = rd.radial_sample(lambda r: np.exp(-r * r / 2), 8.0, 4001)
    V = rd.radial_cs_potential(prof)
    i0, j0 = g.origin
    for k in (0, 4, 8, 16, 32):
        r = k * g.h
        assert pot[i0 + k, j0] == pytest.approx(np.interp(r, V.r, V.values), abs=1e-5)


def test_cs_energy_radial_vs_2d(gauss128, gprof):
    cs2 = ga.cs_energy_of(gauss128)
    assert rd.radial_cs_energy(gprof) == pytest.approx(cs2, rel=1e-3)
    assert rd.radial_mass(gprof) == pytest.approx(math.pi, rel=1e-10)


def test_crosscheck_gaussian():
    g = gr.make_grid(8.0, 128)
    rep = rd.radial_crosscheck(gaussian(g))
    assert rep.gauge_max_dev <= 1e-3
    assert rep.cs_rel_dev <= 1e-3
    assert rep.radii.min() >= 0.5 and rep.radii.max() <= 3.0
    # analytic h along the same ray
    assert np.max(np.abs(rep.gauge_2d - H(rep.radii) / rep.radii)) <= 1e-3


def test_crosscheck_zero(grid128):
    rep = rd.radial_crosscheck(gr.Field2D(grid128, np.zeros((128, 128))))
    assert rep.gauge_max_dev == 0.0 and rep.cs_2d == 0.0 and rep.cs_rel_dev == 0.0


def test_crosscheck_not_radial(grid128):
    with pytest.raises(NotRadial):
        rd.radial_crosscheck(gaussian(grid128, 1.0, (0.8, 0.0)))


def test_profile_csv_round_trip(tmp_path, gprof):
    path = rd.write_profile(gprof, tmp_path / "prof.csv")
    assert path.read_text().splitlines()[0] == "r,u"
    back = rd.read_profile(path)
    assert back.M == gprof.M and back.r_max == gprof.r_max
    np.testing.assert_array_equal(back.values, gprof.values)


def test_field_from_profile(gprof):
    g = gr.make_grid(6.0, 64)
    u = rd.field_from_profile(gprof, g, t=2.0)
    expect = 2.0 * np.exp(-(2.0 * g.r) ** 2 / 2)
    assert np.max(np.abs(u.values - expect)) < 1e-8


def test_radial_field_validation():
    with pytest.raises(ValueError):
        rd.RadialField(1.0, 10, np.zeros(9))
    with pytest.raises(ValueError):
        rd.RadialField(1.0, 3, np.array([0.0, np.nan, 1.0]))
