import math

import numpy as np
import pytest

from cssnorm import gauge as ga
from cssnorm import grid as gr
from cssnorm.errors import SupportsOverlap

from conftest import bump, corpus, gaussian


def h_gauss(s):
    return (1 - np.exp(-s * s)) / 4


@pytest.fixture(scope="module")
def g8():
    # h = 1/8, so s = 0.5, 1, 2 are grid nodes on the x1 axis
    return gr.make_grid(8.0, 128)


def test_zero_field(grid128):
    z = gr.Field2D(grid128, np.zeros((128, 128)))
    gf = ga.gauge_fields(z)
    for f in (gf.a0, gf.a1, gf.a2):
        assert np.all(f.values == 0)
    assert gf.cs_energy == 0.0


def test_radial_gaussian_magnitude(g8):
    u = gaussian(g8)
    a1, a2 = ga.compute_a12(u)
    i0, j0 = g8.origin
    for s in (0.5, 1.0, 2.0):
        i = i0 + int(round(s / g8.h))
        mag = math.hypot(a1.values[i, j0], a2.values[i, j0])
        assert abs(mag - h_gauss(s) / s) < 1e-4


def test_radial_gaussian_direction(g8):
    """A = (x2, -x1) h(|x|)/|x|^2, i.e. A1 = +x2 h/|x|^2 as in Eq. (CSS2)."""
    u = gaussian(g8)
    a1, a2 = ga.compute_a12(u)
    x1, x2 = g8.mesh
    r2 = x1 ** 2 + x2 ** 2
    mask = (r2 > 0.25) & (r2 < 9)
    hr = h_gauss(np.sqrt(r2[mask])) / r2[mask]
    assert np.max(np.abs(a1.values[mask] - x2[mask] * hr)) < 1e-4
    assert np.max(np.abs(a2.values[mask] + x1[mask] * hr)) < 1e-4
    # tangential: x . A = 0
    assert np.max(np.abs(x1 * a1.values + x2 * a2.values)[mask]) < 1e-4


def test_translation_equivariance(grid128):
    s1, s2 = 5, -3  # grid-aligned shift z = (5h, -3h)
    z = (s1 * grid128.h, s2 * grid128.h)
    u = gaussian(grid128, 0.8, aniso=(1.0, 0.7))
    v = gaussian(grid128, 0.8, center=z, aniso=(1.0, 0.7))
    gu, gv = ga.gauge_fields(u), ga.gauge_fields(v)
    N = grid128.N
    sl_v = (slice(10 + s1, N - 10 + s1), slice(10 + s2, N - 10 + s2))
    sl_u = (slice(10, N - 10), slice(10, N - 10))
    for fu, fv in ((gu.a1, gv.a1), (gu.a2, gv.a2), (gu.a0, gv.a0)):
        assert np.max(np.abs(fv.values[sl_v] - fu.values[sl_u])) < 1e-8


@pytest.mark.parametrize("k", range(10))
def test_gauge0_identity(grid128, k):
    u = corpus(grid128)[k]
    gf = ga.gauge_fields(u)
    lhs = gr.integrate(u.like(gf.a0.values * u.values ** 2))
    assert abs(lhs - 2 * gf.cs_energy) <= 1e-6 * gf.cs_energy


def test_a0_vs_direct_quadrature():
    L = 10.0
    coarse = gr.make_grid(L, 128)
    fine = gr.make_grid(L, 512)
    f = lambda a, b: np.exp(-(a * a + 0.8 * b * b) / 2)
    u = gr.sample(coarse, f)
    a0 = ga.gauge_fields(u).a0
    # oracle: direct Riesz sums of A_j u^2 on a 4x finer sampling
    uf = gr.sample(fine, f)
    a1f, a2f = ga.compute_a12(uf)
    probes = [(i, j) for i in range(43, 91, 6) for j in range(43, 91, 6)]
    assert len(probes) == 64
    pf = [(4 * i, 4 * j) for i, j in probes]
    s1 = ga.direct_riesz(uf.like(a2f.values * uf.values ** 2), pf, 1)
    s2 = ga.direct_riesz(uf.like(a1f.values * uf.values ** 2), pf, 2)
    direct = (s1 - s2) / (2 * math.pi)
    got = np.array([a0.values[i, j] for i, j in probes])
    assert np.max(np.abs(got - direct)) < 1e-4


def test_sampled_kernel_cross_validation(grid128):
    u = gaussian(grid128, 1.0, (0.3, 0.0), (1.0, 0.8))
    e = ga.gauge_fields(u, "ewald")
    s = ga.gauge_fields(u, "sampled")
    # the sampled kernel drops the singular cell: O(h) error
    assert abs(e.cs_energy - s.cs_energy) < 3e-2 * e.cs_energy


def test_sextic_scaling(gauss128):
    cs = ga.cs_energy_of(gauss128)
    for gam in (0.5, 2.0, 3.0):
        assert ga.cs_energy_of(gauss128 * gam) == pytest.approx(gam ** 6 * cs, rel=1e-10)


def test_fiber_scaling():
    g = gr.make_grid(8.0, 256)
    u = gaussian(g)
    ut = gr.scale_field(u, 2.0)
    assert ga.cs_energy_of(ut) == pytest.approx(4 * ga.cs_energy_of(u), rel=1e-3)


def test_sign_flip_invariance(grid128):
    u = gaussian(grid128, 1.0, (0.2, -0.1))
    x1, _ = grid128.mesh
    v = u.like(np.where(x1 > 0.3, -u.values, u.values))
    gu, gv = ga.gauge_fields(u), ga.gauge_fields(v)
    for a, b in ((gu.a0, gv.a0), (gu.a1, gv.a1), (gu.a2, gv.a2)):
        assert np.array_equal(a.values, b.values)


def test_parity(grid128):
    # even in x2 (centre on the x1 axis): A1 odd in x2
    u = gaussian(grid128, 1.0, (0.7, 0.0), (1.0, 0.6))
    a1, _ = ga.compute_a12(u)
    v = a1.values[:, 1:]
    assert np.max(np.abs(v + v[:, ::-1])) < 1e-10
    # even in x1: A2 odd in x1
    w = gaussian(grid128, 1.0, (0.0, -0.5), (0.6, 1.0))
    _, a2 = ga.compute_a12(w)
    v = a2.values[1:, :]
    assert np.max(np.abs(v + v[::-1, :])) < 1e-10


# -- bounds diagnostics ------------------------------------------------------

def test_r_hat():
    assert ga.r_hat(1.5) == pytest.approx(6.0)
    for r in (1.0, 2.0, 0.5, 2.5):
        with pytest.raises(ValueError):
            ga.r_hat(r)


def test_bounds_zero_field(grid128):
    rep = ga.gauge_bounds_report(gr.Field2D(grid128, np.zeros((128, 128))), 1.5)
    assert rep.degenerate
    assert rep.ratio_a1 == rep.ratio_a2 == rep.ratio_gauge1 == 0.0


def test_bounds_rejects_bad_r(gauss128):
    with pytest.raises(ValueError):
        ga.gauge_bounds_report(gauss128, 2.0)


def test_bounds_gaussian_family():
    g = gr.make_grid(12.0, 256)
    fam = [gaussian(g, s) for s in (0.5, 1.0, 2.0)]
    singles = [ga.gauge_bounds_report(u, 1.5) for u in fam]
    rep = ga.gauge_bounds_report(fam, 1.5)
    assert rep.corpus_size == 3 and not rep.degenerate
    for name in ("ratio_a1", "ratio_a2", "ratio_gauge1"):
        vals = [getattr(s, name) for s in singles]
        assert all(np.isfinite(v) and v > 0 for v in vals)
        assert getattr(rep, name) == pytest.approx(max(vals))
    # |A_j|_rhat / |u|_2r^2 is dilation invariant (both sides scale alike)
    assert max(s.ratio_a1 for s in singles) < 1.02 * min(s.ratio_a1 for s in singles)
    assert ga.GaugeBoundsReport.from_json(rep.to_json()) == rep


# -- disjoint supports (Lemma A.5) ------------------------------------------

@pytest.fixture(scope="module")
def g16():
    return gr.make_grid(16.0, 256)


def test_disjoint_zero_v(g16):
    u = bump(g16, 0.45, (1.0, 0.0))
    res = ga.disjoint_support_additivity_check(u, gr.Field2D(g16, np.zeros((256, 256))), [0.4, 0.2, 0.1])
    assert np.all(res == 0)


def test_disjoint_decreasing(g16):
    # v at the origin, u off-centre: u_t = t u(t x) moves outward as t -> 0
    u = bump(g16, 0.45, (1.0, 0.0))
    v = bump(g16, 0.5)
    res = ga.disjoint_support_additivity_check(u, v, [0.4, 0.2, 0.1])
    assert np.all(np.diff(res) < 0)
    assert res[-1] < 0.2 * res[0]


def test_disjoint_overlap(g16):
    u = bump(g16, 0.45, (1.0, 0.0))
    v = bump(g16, 0.5, (1.0, 0.3))
    with pytest.raises(SupportsOverlap):
        ga.disjoint_support_additivity_check(u, v, [1.0])
