import csv
import math

import numpy as np
import pytest

from cssnorm import functional as fn
from cssnorm import grid as gr
from cssnorm import moser as mo
from cssnorm import nonlin as nl
from cssnorm.errors import NoRoot, SupportExceedsDomain

A10 = math.sqrt(mo.mass_from_rn(1.0, 10, 5.0))


@pytest.fixture(scope="module")
def p10():
    return mo.MoserParams(10, 1.0, A10, 5.0)


def test_forward_rn():
    assert mo.mass_from_rn(1.0, 10, 5.0) == pytest.approx(0.59337, abs=5e-6)


def test_solve_rn_inverse():
    assert mo.solve_rn(math.sqrt(0.59337), 1.0, 10) == pytest.approx(5.0, abs=1e-4)
    assert mo.solve_rn(A10, 1.0, 10) == pytest.approx(5.0, abs=1e-6)
    for n in (2, 50, 10 ** 4):
        R = mo.solve_rn(1.3, 0.7, n)
        assert mo.mass_from_rn(0.7, n, R) == pytest.approx(1.69, rel=1e-12)
        assert R >= mo.rn_lower_bound(0.7)


def test_solve_rn_errors():
    with pytest.raises(NoRoot, match="Eq. \\(Rn\\)"):
        mo.solve_rn(0.1, 1.0, 10)
    with pytest.raises(ValueError):
        mo.solve_rn(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        mo.solve_rn(1.0, 0.0, 10)


def test_params_admissibility():
    with pytest.raises(ValueError, match="admissibility"):
        mo.MoserParams(10, 1.0, 1.0, 0.5)


@pytest.mark.parametrize("n", [10 ** 3, 10 ** 6])
def test_rn_asymptotics(n):
    # the correction is O(rho / R_n) = O(rho / (a sqrt(log n))): a = 2 keeps it below 5%
    a = 2.0
    R = mo.solve_rn(a, 1.0, n)
    assert R * R / math.log(n) == pytest.approx(12 * a * a / math.log(2) ** 2, rel=0.05)


def test_rn_asymptotics_converge():
    a = 1.0
    lim = 12 * a * a / math.log(2) ** 2
    errs = [abs(mo.solve_rn(a, 1.0, n) ** 2 / math.log(n) - lim) for n in (10 ** 3, 10 ** 6, 10 ** 12, 10 ** 24)]
    assert all(b < a_ for a_, b in zip(errs, errs[1:]))


def test_analytic_norms(p10):
    ex = mo.moser_analytic_norms(p10)
    assert ex.gradsq == pytest.approx(0.826482, abs=2e-6)  # 0.8264833
    assert ex.l2sq == pytest.approx(A10 ** 2, rel=1e-15)
    assert ex.l4_pieces[0] == pytest.approx(math.log(10) ** 2 / (400 * math.pi), rel=1e-14)
    assert ex.l4_pieces[0] == pytest.approx(0.004219, abs=5e-7)


def test_l4_pieces_paper_vs_radial_quadrature():
    for n, rho, a in ((10, 1.0, A10), (100, 1.0, 1.0), (1000, 0.5, 0.8)):
        p = mo.moser_params(a, rho, n)
        np.testing.assert_allclose(mo.moser_analytic_norms(p).l4_pieces, mo.l4_pieces_quadrature(p), rtol=1e-10)


def test_gradsq_at_most_one():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 10 ** 6))
        rho = float(rng.uniform(0.1, 3.0))
        R = mo.rn_lower_bound(rho) * float(rng.uniform(1.0, 20.0))
        p = mo.MoserParams(n, rho, 1.0, R)
        assert mo.moser_analytic_norms(p).gradsq <= 1.0


def test_field_shape(p10):
    g = gr.make_grid(6.0, 256)
    w = mo.moser_field(p10, g)
    i0, j0 = g.origin
    assert w.values[i0, j0] == pytest.approx(math.sqrt(math.log(10) / (2 * math.pi)), rel=1e-15)
    assert np.all(w.values[g.r >= 5.0] == 0)
    assert np.all(w.values >= 0)
    with pytest.raises(SupportExceedsDomain):
        mo.moser_field(p10, gr.make_grid(4.0, 64))


def test_profile_continuous(p10):
    for r0 in (0.1, 0.5, 5.0):
        lo, hi = mo.moser_profile(p10, r0 * (1 - 1e-12)), mo.moser_profile(p10, r0 * (1 + 1e-12))
        assert abs(lo - hi) < 1e-10


@pytest.fixture(scope="module")
def row10(p10):
    return mo.moser_row(p10, N=1024)


def test_quadrature_matches_closed_forms(row10):
    assert row10.l2sq_quad == pytest.approx(row10.l2sq_exact, rel=1e-3)
    assert row10.gradsq_quad == pytest.approx(row10.gradsq_exact, rel=1e-3)
    assert row10.l4_quad == pytest.approx(row10.l4_exact, rel=1e-2)
    assert row10.cs_energy > 0


def test_l4_vanishing_and_csv(tmp_path):
    rows, dec = mo.moser_l4_vanishing_check(1.0, 1.0, [10, 100, 1000], N=512)
    assert dec and len(rows) == 3
    for r in rows:
        assert r.l4_quad == pytest.approx(r.l4_exact, rel=1e-2)
    assert all(b.l4_exact < a.l4_exact for a, b in zip(rows, rows[1:]))
    path = mo.write_moser_csv(rows, tmp_path / "moser.csv")
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert tuple(data[0]) == mo.CSV_HEADER and len(data) == 4
    single, _ = mo.moser_l4_vanishing_check(1.0, 1.0, [10], N=256)
    assert len(single) == 1
    with pytest.raises(ValueError):
        mo.moser_l4_vanishing_check(1.0, 1.0, [100, 10], N=256)


# -- thresholds -------------------------------------------------------------------

CRIT = nl.NonlinearitySpec(nl.CriticalExp(alpha0=1.0, beta=50.0, order=3), theta=6.0)


def test_c_star_values():
    assert nl.c_star(1.0) == 2 * math.pi
    assert nl.c_star(4 * math.pi) == pytest.approx(0.5)


def test_rho_condition():
    p = mo.moser_params(1.0, 1.0, 10, alpha0=1.0, theta=6.0, beta0=50.0)
    assert p.rho_condition() is True
    assert mo.moser_params(1.0, 1.0, 10).rho_condition() is None
    assert mo.moser_params(1.0, 1.0, 10, alpha0=1.0, theta=6.0, beta0=0.1).rho_condition() is False


def test_threshold_passes_for_some_n():
    reps = [mo.threshold_check(CRIT, mo.moser_params(1.0, 1.0, n, alpha0=1.0, theta=6.0, beta0=50.0))
            for n in (10, 100, 1000, 10 ** 4)]
    assert any(r.passes for r in reps)
    for r in reps:
        assert r.c_star == 2 * math.pi and np.isfinite(r.max_fiber_E)


def test_threshold_agrees_with_projection():
    p = mo.moser_params(1.0, 1.0, 100)
    rep = mo.threshold_check(CRIT, p)
    fd = mo._moser_fiber(p, CRIT, None, "ewald")
    pr = fn.project_to_manifold(fd, CRIT)
    assert rep.max_fiber_E == pytest.approx(pr.E_at_tu, rel=1e-8)
    assert rep.t_max == pytest.approx(pr.t_u, rel=1e-4)


def test_threshold_needs_critical_spec(p10):
    with pytest.raises(ValueError):
        mo.threshold_check(nl.pure_power(6), p10)


def test_xi_threshold():
    # gamma + alpha_bar0 R^(delta-2) = 4 pi with alpha_bar0 = 0
    assert mo.xi_threshold(1.0, 1.0, 6.0, 4 * math.pi, 0.0, 1.5, 0.0) == pytest.approx(0.75 * math.pi ** 2, rel=1e-14)
    assert 0.75 * math.pi ** 2 == pytest.approx(7.4022, abs=1e-4)
    vals = [mo.xi_threshold(R, 1.0, 6.0, 1.0, 0.5, 1.5, 0.1) for R in (1.0, 2.0, 4.0)]
    assert vals[0] > vals[1] > vals[2]
    with pytest.raises(ValueError):
        mo.xi_threshold(1.0, 1.0, 4.0, 1.0, 0.5, 1.5, 0.0)
