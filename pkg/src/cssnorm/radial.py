"""Radial reduction of Eq. (BHS).

For ``u = u(|x|)`` the gauge fields reduce to ``(A1, A2) = (x2, -x1) h(|x|)/|x|^2``
with ``h(s) = int_0^s (r/2) u(r)^2 dr`` and the equation becomes

    -u'' - u'/r + lambda u + V(r) u = f(u),
    V(r) = int_r^inf (h(s)/s) u(s)^2 ds + h(r)^2/r^2.

Two discretizations live here:

* analysis helpers on a uniform node grid ``r_i = i dr`` (``radial_h``,
  ``radial_cs_potential``, ``radial_cs_energy``), used to cross-check 2-D
  results;
* :class:`RadialOperators`, a finite-volume discretization whose energy and
  gradient are exactly consistent, used by the radial ground-state solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid, simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from . import gauge as ga
from . import grid as gr
from .errors import NotRadial
from .grid import Field2D

RADIAL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RadialField:
    r_max: float
    M: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.M,):
            raise ValueError(f"values shape {v.shape} does not match M={self.M}")
        if not np.all(np.isfinite(v)):
            raise ValueError("radial field contains non-finite values")
        object.__setattr__(self, "values", v)

    @cached_property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.M)

    @property
    def dr(self) -> float:
        return self.r_max / (self.M - 1)

    def like(self, values: np.ndarray) -> "RadialField":
        return RadialField(self.r_max, self.M, values)

    def __call__(self, s) -> np.ndarray:
        """Cubic-spline evaluation; zero beyond ``r_max``."""
        s = np.asarray(s, dtype=float)
        spline = CubicSpline(self.r, self.values, bc_type=((1, 0.0), "not-a-knot"))
        return np.where(s <= self.r_max, spline(np.minimum(np.abs(s), self.r_max)), 0.0)


def radial_sample(func: Callable[[np.ndarray], np.ndarray], r_max: float, M: int) -> RadialField:
    return RadialField(r_max, M, func(np.linspace(0.0, r_max, M)))


def _cumulative(y: np.ndarray, dr: float, method: str) -> np.ndarray:
    if method == "trapezoid":
        return cumulative_trapezoid(y, dx=dr, initial=0.0)
    if method == "simpson":
        return cumulative_simpson(y, dx=dr, initial=0.0)
    raise ValueError(f"unknown quadrature {method!r}")


def radial_h(u: RadialField, method: str = "simpson") -> RadialField:
    """``h(s) = int_0^s (r/2) u^2 dr`` by cumulative quadrature, ``h(0) = 0``."""
    return u.like(_cumulative(0.5 * u.r * u.values ** 2, u.dr, method))


def _h_over_r2(h: np.ndarray, r: np.ndarray, u0: float) -> np.ndarray:
    out = np.empty_like(h)
    out[1:] = h[1:] / r[1:] ** 2
    out[0] = 0.25 * u0 * u0  # h(r) ~ r^2 u(0)^2 / 4
    return out


def radial_cs_potential(u: RadialField, method: str = "simpson") -> RadialField:
    """``V(r) = int_r^{r_max} (h/s) u^2 ds + h(r)^2/r^2`` with the ``r -> 0`` limits."""
    h = radial_h(u, method).values
    r = u.r
    h_r = np.zeros_like(h)
    h_r[1:] = h[1:] / r[1:]
    integrand = h_r * u.values ** 2
    tail = _cumulative(integrand[::-1], u.dr, method)[::-1]
    return u.like(tail + h * _h_over_r2(h, r, u.values[0]))


def radial_cs_energy(u: RadialField, method: str = "simpson") -> float:
    """``2 pi int (h^2/r^2) u^2 r dr``, the radial form of ``int (A1^2 + A2^2) u^2``."""
    h = radial_h(u, method).values
    r = u.r
    integrand = np.zeros_like(h)
    integrand[1:] = h[1:] ** 2 / r[1:] * u.values[1:] ** 2
    return float(2 * math.pi * simpson(integrand, dx=u.dr))


def radial_mass(u: RadialField) -> float:
    return float(2 * math.pi * simpson(u.r * u.values ** 2, dx=u.dr))


# -- 2-D <-> radial ----------------------------------------------------------

def angular_deviation(u: Field2D, n_radii: int = 24, n_angles: int = 16) -> float:
    """Max over circles of ``(max - min)/|u|_inf`` of the interpolant of ``u``."""
    scale = gr.lp_norm(u, np.inf)
    if scale == 0.0:
        return 0.0
    radii = np.linspace(0.0, 0.9 * u.grid.L, n_radii + 1)[1:]
    phi = 2 * np.pi * np.arange(n_angles) / n_angles
    rr, pp = np.meshgrid(radii, phi, indexing="ij")
    vals = gr.interpolate(u, rr * np.cos(pp), rr * np.sin(pp))
    return float(np.max(vals.max(axis=1) - vals.min(axis=1)) / scale)


def profile_from_field(u: Field2D, M: Optional[int] = None, check: bool = True) -> RadialField:
    """Radial profile of a radially symmetric field along the positive ``x1`` ray."""
    if check:
        dev = angular_deviation(u)
        if dev > RADIAL_TOL:
            raise NotRadial(f"angular deviation {dev:.3e} exceeds {RADIAL_TOL:.0e}")
    M = M or 8 * u.grid.N + 1
    r_max = u.grid.L
    r = np.linspace(0.0, r_max, M)
    return RadialField(r_max, M, gr.interpolate(u, r, np.zeros_like(r)))


@dataclass
class CrosscheckReport:
    gauge_max_dev: float
    cs_2d: float
    cs_radial: float
    cs_rel_dev: float
    radii: np.ndarray
    gauge_2d: np.ndarray
    gauge_radial: np.ndarray


def radial_crosscheck(u2d: Field2D, r_window: tuple[float, float] = (0.5, 3.0), method: str = "ewald") -> CrosscheckReport:
    """Compare 2-D gauge magnitude and CS energy with the radial formulas."""
    prof = profile_from_field(u2d)
    g = u2d.grid
    a1, a2 = ga.compute_a12(u2d, method)
    cs2 = ga.cs_energy(u2d, a1, a2)
    i0 = g.N // 2
    ray = np.arange(i0 + 1, g.N)
    radii = g.x[ray]
    sel = (radii >= r_window[0]) & (radii <= r_window[1])
    radii = radii[sel]
    mag2d = np.hypot(a1.values[ray, i0], a2.values[ray, i0])[sel]
    h = radial_h(prof).values
    magr = np.interp(radii, prof.r, h) / radii if radii.size else radii
    csr = radial_cs_energy(prof)
    dev = float(np.max(np.abs(mag2d - magr))) if radii.size else 0.0
    rel = abs(cs2 - csr) / abs(csr) if csr != 0 else abs(cs2 - csr)
    return CrosscheckReport(dev, cs2, csr, rel, radii, mag2d, magr)


def field_from_profile(prof: RadialField, grid: gr.Grid, t: float = 1.0) -> Field2D:
    """Sample ``t * u(t |x|)`` on a 2-D grid."""
    return Field2D(grid, t * prof(t * grid.r))


# -- radial CSV --------------------------------------------------------------

def write_profile(u: RadialField, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack([u.r, u.values]), delimiter=",", header="r,u", comments="", fmt="%.17g")
    return path


def read_profile(path: str | Path) -> RadialField:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    r, v = data[:, 0], data[:, 1]
    return RadialField(float(r[-1]), len(r), v)


# -- finite-volume operators for the radial solve ----------------------------

class RadialOperators:
    """Finite-volume discretization on ``r_i = i dr``, ``i = 0..M-1``.

    Cell ``i`` is ``[r_i - dr/2, r_i + dr/2]`` (cell 0 is ``[0, dr/2]``), with
    area weights ``w_i``; ``u_M = 0`` beyond the last node.  Kinetic energy
    is ``sum_e 2 pi r_e (u_{i+1} - u_i)^2 / dr`` over cell edges and the
    gauge term uses the enclosed cell masses, so the discrete gradient is the
    exact derivative of the discrete energy.  At the origin this reproduces
    the Neumann condition ``Lap u_0 = 4 (u_1 - u_0)/dr^2``.
    """

    def __init__(self, r_max: float, M: int):
        self.r_max = float(r_max)
        self.M = int(M)
        self.dr = self.r_max / (self.M - 1)
        self.r = np.linspace(0.0, self.r_max, self.M)
        self.w = 2 * math.pi * self.r * self.dr
        self.w[0] = math.pi * self.dr ** 2 / 4
        self.r_edge = self.r + 0.5 * self.dr  # edge between i and i+1 (last: to the zero ghost)
        self.c_edge = 2 * math.pi * self.r_edge / self.dr

    def kinetic(self, u: np.ndarray) -> float:
        du = np.diff(np.append(u, 0.0))
        return float(np.sum(self.c_edge * du * du))

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        flux = self.c_edge * np.diff(np.append(u, 0.0))  # c_e (u_{i+1} - u_i)
        out = -flux.copy()
        out[1:] += flux[:-1]
        return out / self.w

    def _h(self, u: np.ndarray) -> np.ndarray:
        m = self.w * u * u
        enclosed = np.concatenate(([0.0], np.cumsum(m)[:-1]))
        h = (enclosed + 0.5 * m) / (4 * math.pi)
        h[0] = 0.0
        return h

    def gauge(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """``(CS energy, A0 + |A|^2)`` on the nodes."""
        h = self._h(u)
        hr2 = np.zeros_like(h)
        hr2[1:] = h[1:] / self.r[1:] ** 2
        a2 = h * hr2  # h^2/r^2
        cs = float(np.sum(self.w * a2 * u * u))
        q = self.w * u * u * hr2
        q[0] = 0.0
        # A0_j = (1/2pi) sum_i c_ij q_i, c_ij = 1 (i > j), 1/2 (i = j > 0)
        tail = np.concatenate((np.cumsum(q[::-1])[::-1][1:], [0.0]))
        c_self = np.full_like(q, 0.5)
        c_self[0] = 0.0
        a0 = (tail + c_self * q) / (2 * math.pi)
        return cs, a0 + a2

    def h(self, u: np.ndarray) -> np.ndarray:
        return self._h(u)

    def precondition(self, g: np.ndarray, c: float) -> np.ndarray:
        """Solve ``(c - Lap) x = g`` with the tridiagonal finite-volume Laplacian."""
        M = self.M
        ab = np.zeros((3, M))
        diag = self.c_edge.copy()
        diag[1:] += self.c_edge[:-1]
        ab[1] = c * self.w + diag
        ab[0, 1:] = -self.c_edge[:-1]
        ab[2, :-1] = -self.c_edge[:-1]
        return solve_banded((1, 1), ab, self.w * g)

    def scale(self, u: np.ndarray, t: float) -> np.ndarray:
        spline = CubicSpline(self.r, u, bc_type=((1, 0.0), "not-a-knot"))
        s = t * self.r
        return np.where(s <= self.r_max, t * spline(np.minimum(s, self.r_max)), 0.0)

    def boundary_max(self, u: np.ndarray, ring: int = 2) -> float:
        return float(np.max(np.abs(u[-ring:])))


def solve_radial(spec, cfg, r_max: float, M: int, callback=None):
    """Radial ground state with the shared flow of :mod:`cssnorm.solver`."""
    from . import solver

    return solver.minimize_radial(spec, cfg, r_max, M, callback=callback)
