"""The Moser-type sequence of Section 4 and the threshold diagnostics.

``w_n`` (Eq. (wn)) is the radial profile, scaled by ``1/sqrt(2 pi)``,

    sqrt(log n)                                   r <= rho/n
    log(rho/r)/sqrt(log n)                        rho/n <= r <= rho/2
    2 (R_n - r) log 2 / ((2 R_n - rho) sqrt(log n))   rho/2 <= r <= R_n
    0                                             r >= R_n

with ``R_n`` fixed by the mass condition Eq. (Rn).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import functional as fn
from . import gauge as ga
from . import grid as gr
from . import nonlin as nl
from .errors import NoRoot, Overflow, SupportExceedsDomain
from .grid import Field2D, Grid

LOG2 = math.log(2.0)


def rn_lower_bound(rho: float) -> float:
    """Admissibility bound ``R_n >= (2 + log 2) rho / (2 (2 - log 2))``."""
    return (2 + LOG2) / (2 * (2 - LOG2)) * rho


def mass_from_rn(rho: float, n: int, r_n: float) -> float:
    """Right side of Eq. (Rn): ``a^2`` as a function of ``R_n``."""
    ln = math.log(n)
    first = rho ** 2 / (16 * ln) * (2 * LOG2 ** 2 + 2 * LOG2 + 1 - 8 * ln / n ** 2 - 4 / n ** 2)
    return first + (2 * r_n - rho) * (2 * r_n + 3 * rho) * LOG2 ** 2 / (48 * ln)


def solve_rn(a: float, rho: float, n: int) -> float:
    """Invert Eq. (Rn) for ``R_n`` (the right side increases in ``R_n``)."""
    if n < 2 or int(n) != n:
        raise ValueError("n must be an integer >= 2")
    if not rho > 0:
        raise ValueError("rho must be positive")
    target = a * a
    lo = rn_lower_bound(rho)
    if mass_from_rn(rho, n, lo) > target:
        raise NoRoot(
            f"a^2 = {target:.6g} is below the Eq. (Rn) value {mass_from_rn(rho, n, lo):.6g} "
            f"at the minimal admissible R_n = {lo:.6g}"
        )
    hi = 2 * lo
    while mass_from_rn(rho, n, hi) < target:
        hi *= 2
    return brentq(lambda R: mass_from_rn(rho, n, R) - target, lo, hi, xtol=1e-14, rtol=1e-15)


@dataclass(frozen=True)
class MoserParams:
    n: int
    rho: float
    a: float
    r_n: float
    alpha0: Optional[float] = None
    theta: Optional[float] = None
    beta0: Optional[float] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.r_n < rn_lower_bound(self.rho) * (1 - 1e-12):
            raise ValueError(
                f"R_n = {self.r_n:.6g} violates Eq. (Rn) admissibility R_n >= (2+log2)rho/(2(2-log2)) = "
                f"{rn_lower_bound(self.rho):.6g}"
            )

    def rho_condition(self) -> Optional[bool]:
        """Eq. (rho): ``rho > sqrt(pi (theta-2)/theta) / (alpha0 beta0)`` (None if unset)."""
        if None in (self.alpha0, self.theta, self.beta0):
            return None
        return self.rho > math.sqrt(math.pi * (self.theta - 2) / self.theta) / (self.alpha0 * self.beta0)


def moser_params(a: float, rho: float, n: int, **kw) -> MoserParams:
    return MoserParams(n, rho, a, solve_rn(a, rho, n), **kw)


def moser_profile(params: MoserParams, r) -> np.ndarray:
    r = np.abs(np.asarray(r, dtype=float))
    n, rho, R = params.n, params.rho, params.r_n
    ln = math.log(n)
    with np.errstate(divide="ignore"):
        mid = np.log(rho / np.maximum(r, 1e-300)) / math.sqrt(ln)
    out = np.select(
        [r <= rho / n, r <= rho / 2, r <= R],
        [math.sqrt(ln), mid, 2 * (R - r) * LOG2 / ((2 * R - rho) * math.sqrt(ln))],
        0.0,
    )
    return out / math.sqrt(2 * math.pi)


def moser_profile_slope(params: MoserParams, r) -> np.ndarray:
    """``|w_n'(r)|`` branchwise (zero on the plateau and outside the support)."""
    r = np.abs(np.asarray(r, dtype=float))
    n, rho, R = params.n, params.rho, params.r_n
    ln = math.log(n)
    with np.errstate(divide="ignore"):
        mid = 1.0 / (np.maximum(r, 1e-300) * math.sqrt(ln))
    out = np.select(
        [r <= rho / n, r <= rho / 2, r <= R],
        [0.0, mid, 2 * LOG2 / ((2 * R - rho) * math.sqrt(ln))],
        0.0,
    )
    return out / math.sqrt(2 * math.pi)


def moser_field(params: MoserParams, grid: Grid) -> Field2D:
    if not grid.L > params.r_n:
        raise SupportExceedsDomain(f"support radius R_n = {params.r_n:.6g} does not fit in L = {grid.L:.6g}")
    return Field2D(grid, moser_profile(params, grid.r), f"w_{params.n}")


@dataclass
class MoserNorms:
    l2sq: float
    gradsq: float
    l4_pieces: tuple[float, float, float]

    @property
    def l4(self) -> float:
        return float(sum(self.l4_pieces))


def _middle_l4_paper(rho: float, n: int) -> float:
    """Middle annulus of Lemma 4.1 via the antiderivative of ``s^4 e^{2s}``.

    ``int s^4 e^{2s} ds = e^{2s} (2s^4 - 4s^3 + 6s^2 - 6s + 3)/4``; the paper
    prints the constant as ``+4``, a typo (its derivative leaves ``e^{2s}/2``).
    """
    ln = math.log(n)

    def P(s):
        return (2 * s ** 4 - 4 * s ** 3 + 6 * s ** 2 - 6 * s + 3) * math.exp(2 * s)

    return rho ** 2 / (8 * math.pi * ln ** 2) * (P(math.log(0.5)) - P(math.log(1.0 / n)))


def _outer_l4_paper(rho: float, n: int, R: float) -> float:
    """Outer annulus of Lemma 4.1 using the paper's sixth-degree antiderivative."""
    ln = math.log(n)

    def P(r):
        d = r - R
        return 15 * d ** 4 * r ** 2 - 20 * d ** 3 * r ** 3 + 15 * d ** 2 * r ** 4 - 6 * d * r ** 5 + r ** 6

    return 4 * LOG2 ** 4 / (15 * math.pi * (2 * R - rho) ** 4 * ln ** 2) * (P(R) - P(rho / 2))


def l4_pieces_quadrature(params: MoserParams) -> tuple[float, float, float]:
    """The same three pieces by 1-D radial quadrature of ``2 pi r w_n^4``."""
    rho, n, R = params.rho, params.n, params.r_n

    def piece(a, b):
        return quad(lambda r: 2 * math.pi * r * moser_profile(params, r) ** 4, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]

    return piece(0, rho / n), piece(rho / n, rho / 2), piece(rho / 2, R)


def moser_analytic_norms(params: MoserParams) -> MoserNorms:
    rho, n, R = params.rho, params.n, params.r_n
    ln = math.log(n)
    l2 = mass_from_rn(rho, n, R)
    grad = 1 - LOG2 / ln + (2 * R + rho) * LOG2 ** 2 / (2 * (2 * R - rho) * ln)
    inner = rho ** 2 * ln ** 2 / (4 * math.pi * n ** 2)
    return MoserNorms(l2, grad, (inner, _middle_l4_paper(rho, n), _outer_l4_paper(rho, n, R)))


@dataclass
class MoserRow:
    n: int
    rho: float
    Rn: float
    l2sq_quad: float
    l2sq_exact: float
    gradsq_quad: float
    gradsq_exact: float
    l4_quad: float
    l4_exact: float
    cs_energy: float


CSV_HEADER = ("n", "rho", "Rn", "l2sq_quad", "l2sq_exact", "gradsq_quad", "gradsq_exact", "l4_quad", "l4_exact", "cs_energy")


def default_moser_grid(params: MoserParams, N: int = 1024, margin: float = 1.2) -> Grid:
    return gr.make_grid(margin * params.r_n, N)


def _cell_quadrature(params: MoserParams, grid: Grid, func, sub: int = 4, core_sub: int = 128) -> float:
    """``int func(r)`` over the grid cells by an ``sub x sub`` midpoint rule per cell.

    The 3x3 cells around the origin use ``core_sub`` instead: they contain
    the plateau disk ``r <= rho/n``, which is far below the grid spacing for
    large ``n``, and the steep ``log(rho/r)`` piece next to it.
    """
    h = grid.h
    x = grid.x

    def cells(xs, m):
        offs = (np.arange(m) + 0.5) / m - 0.5
        pts = (xs[:, None] + offs[None, :] * h).ravel()
        return pts

    # bulk: every cell, then swap the core cells for a finer rule
    pts = cells(x, sub)
    total = 0.0
    for k in range(0, pts.size, 4 * sub):  # blocks of rows keep memory bounded
        r = np.hypot(pts[k:k + 4 * sub, None], pts[None, :])
        total += float(np.sum(func(r)))
    total *= (h / sub) ** 2
    i0 = grid.origin[0]
    core = x[i0 - 1:i0 + 2]
    pc = cells(core, sub)
    r = np.hypot(pc[:, None], pc[None, :])
    total -= float(np.sum(func(r))) * (h / sub) ** 2
    pc = cells(core, core_sub)
    r = np.hypot(pc[:, None], pc[None, :])
    total += float(np.sum(func(r))) * (h / core_sub) ** 2
    return total


def moser_gradsq_quadrature(params: MoserParams, grid: Grid, sub: int = 4) -> float:
    """Grid quadrature of ``int |grad w_n|^2`` from the branchwise slope.

    Differencing the sampled profile is only first-order accurate across the
    circular kinks (about 1% at N=1024), and plain nodal sampling
    under-resolves the ``1/r^2`` growth of ``|grad w_n|^2`` just outside
    ``r = rho/n``; see :func:`_cell_quadrature`.
    """
    return _cell_quadrature(params, grid, lambda r: moser_profile_slope(params, r) ** 2, sub)


def moser_lp_quadrature(params: MoserParams, grid: Grid, p: float, sub: int = 4) -> float:
    """Grid quadrature of ``int |w_n|^p`` with the cell rule of :func:`_cell_quadrature`."""
    return _cell_quadrature(params, grid, lambda r: moser_profile(params, r) ** p, sub)


def moser_row(params: MoserParams, grid: Optional[Grid] = None, N: int = 1024, method: str = "ewald") -> MoserRow:
    grid = grid or default_moser_grid(params, N)
    w = moser_field(params, grid)
    ex = moser_analytic_norms(params)
    return MoserRow(
        params.n,
        params.rho,
        params.r_n,
        moser_lp_quadrature(params, grid, 2),
        ex.l2sq,
        moser_gradsq_quadrature(params, grid),
        ex.gradsq,
        moser_lp_quadrature(params, grid, 4),
        ex.l4,
        ga.cs_energy_of(w, method),
    )


def moser_l4_vanishing_check(rho: float, a: float, n_list: Sequence[int], N: int = 1024, grids=None,
                             method: str = "ewald") -> tuple[list[MoserRow], bool]:
    """Rows for each ``n`` plus whether ``|w_n|_4^4`` and ``CS(w_n)`` both strictly decrease."""
    n_list = list(n_list)
    if any(n < 2 for n in n_list) or any(b <= a_ for a_, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing integers >= 2")
    rows = []
    for i, n in enumerate(n_list):
        p = moser_params(a, rho, n)
        g = grids[i] if grids is not None else None
        rows.append(moser_row(p, g, N, method))
    dec = all(b.l4_quad < a_.l4_quad and b.cs_energy < a_.cs_energy for a_, b in zip(rows, rows[1:]))
    return rows, dec


def write_moser_csv(rows: Sequence[MoserRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_HEADER)
        for row in rows:
            d = asdict(row)
            wr.writerow([repr(d[k]) if isinstance(d[k], float) else d[k] for k in CSV_HEADER])
    return path


# -- thresholds ------------------------------------------------------------------

@dataclass
class ThresholdReport:
    n: int
    max_fiber_E: float
    t_max: float
    c_star: float
    passes: bool
    overflow: bool = False


def _moser_fiber(params: MoserParams, spec: nl.NonlinearitySpec, grid: Optional[Grid], method: str) -> fn.FiberData:
    if grid is None:
        # radial quadrature, exact kinetic term, CS from a 2-D grid of moderate size
        ex = moser_analytic_norms(params)
        g2 = default_moser_grid(params, 256)
        cs = ga.cs_energy_of(moser_field(params, g2), method)
        r, w = _radial_nodes(params)
        return fn.FiberData(ex.gradsq, cs, moser_profile(params, r), w, spec)
    w = moser_field(params, grid)
    return fn.FiberData(moser_gradsq_quadrature(params, grid), ga.cs_energy_of(w, method), w.values, grid.h ** 2, spec)


def _radial_nodes(params: MoserParams, per_piece: int = 400):
    """Gauss-Legendre nodes/weights (with ``2 pi r``) on each smooth piece of ``w_n``."""
    x, wt = np.polynomial.legendre.leggauss(per_piece)
    rho, n, R = params.rho, params.n, params.r_n
    rs, ws = [], []
    for a, b in ((0, rho / n), (rho / n, rho / 2), (rho / 2, R)):
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        rs.append(r)
        ws.append(0.5 * (b - a) * wt * 2 * math.pi * r)
    return np.concatenate(rs), np.concatenate(ws)


def threshold_check(spec: nl.NonlinearitySpec, params: MoserParams, grid: Optional[Grid] = None,
                    method: str = "ewald") -> ThresholdReport:
    """Lemma 4.2: ``max_t E((w_n)_t)`` against ``c* = 2 pi / alpha0``."""
    alpha0 = spec.critical_alpha
    if alpha0 is None:
        raise ValueError("threshold_check needs a critical-growth spec")
    cs = nl.c_star(alpha0)
    fd = _moser_fiber(params, spec, grid, method)
    # Lemma 4.2: the maximizer satisfies t^2 -> 2 c* as n grows; bracket around it
    t_ref = math.sqrt(2 * cs)
    try:
        proj = fn.max_fiber_energy(fd, spec)
    except Overflow:
        return ThresholdReport(params.n, math.inf, t_ref, cs, False, overflow=True)
    return ThresholdReport(params.n, proj.E_at_tu, proj.t_u, cs, proj.E_at_tu < cs)


def xi_threshold(R: float, a: float, p: float, gamma: float, alpha_bar0: float, delta: float, c_bar_r: float) -> float:
    """Lemma 5.4's ``xi_0^R``."""
    if not p > 4:
        raise ValueError("xi_threshold needs p > 4")
    if not R > 0:
        raise ValueError("R must be positive")
    eff = gamma + alpha_bar0 * R ** (delta - 2)
    pre = p * (1 + 16 * c_bar_r ** 2 * a ** 3) ** (p - 2) / ((p - 2) * a ** p)
    return pre * math.pi ** ((p - 2) / 2) * ((p - 4) * eff / (4 * math.pi * (p - 2))) ** ((p - 4) / 2)
