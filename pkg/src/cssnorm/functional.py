"""Energy ``E``, constraint ``J``, Pohozaev/Nehari residuals, Lagrange
multiplier, and the mass-preserving fiber map ``u_t(x) = t u(t x)``.

Sign convention: the equation reads ``-Lap u + lambda u + (A0 + A1^2 + A2^2) u = f(u)``,
so bound states have ``lambda > 0``.

Fiber quantities never resample the grid; they use the exact scaling laws
``|grad u_t|^2 = t^2 |grad u|^2``, ``CS(u_t) = t^2 CS(u)`` and
``int F(u_t) = t^-2 int F(t u)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import gauge as ga
from . import grid as gr
from . import nonlin as nl
from .errors import NoBracket, NotUnique, Overflow, ZeroMass
from .grid import Field2D
from .nonlin import NonlinearitySpec

T_MIN, T_MAX = 1e-6, 1e6
J_RTOL = 1e-10


@dataclass
class EnergyBreakdown:
    kinetic: float
    cs: float
    potential: float
    E: float
    J: float
    mass: float
    nonlinear_work: float = 0.0  # int f(u) u
    lambda_raw: Optional[float] = None
    lambda_manifold: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @property
    def scale(self) -> float:
        """``kinetic + cs``, the natural size for J-tolerances."""
        return self.kinetic + self.cs


def _parts(values: np.ndarray, weight, spec: NonlinearitySpec) -> tuple[float, float]:
    """``(int F(u), int f(u) u)`` with quadrature weights ``weight``."""
    F = nl.eval_F(spec, values)
    fu = nl.eval_f(spec, values) * values
    return float(np.sum(weight * F)), float(np.sum(weight * fu))


def assemble(kinetic: float, cs: float, potential: float, work: float, mass: float) -> EnergyBreakdown:
    E = 0.5 * kinetic + 0.5 * cs - potential
    J = kinetic + cs - (work - 2.0 * potential)
    bd = EnergyBreakdown(kinetic, cs, potential, E, J, mass, work)
    if mass > 0:
        bd.lambda_raw = -(kinetic + 3.0 * cs - work) / mass
        bd.lambda_manifold = 2.0 * (kinetic + 3.0 * potential - work) / mass
    return bd


def breakdown(u: Field2D, spec: NonlinearitySpec, cs: Optional[float] = None, method: str = "ewald") -> EnergyBreakdown:
    """All energy terms of ``u``; gauge fields are recomputed unless ``cs`` is given."""
    if cs is None:
        cs = ga.cs_energy_of(u, method)
    w = u.grid.h ** 2
    pot, work = _parts(u.values, w, spec)
    return assemble(gr.grad_norm_sq(u), cs, pot, work, float(w * np.sum(u.values ** 2)))


def energy(u: Field2D, spec: NonlinearitySpec, method: str = "ewald") -> float:
    return breakdown(u, spec, method=method).E


# -- fiber map ---------------------------------------------------------------

class FiberData:
    """What the fiber map needs: ``kin``, ``cs`` and the samples of ``u``.

    ``values`` with quadrature ``weights`` represent ``u``, so the same code
    serves 2-D grids and radial profiles.  Evaluations of the nonlinear
    integrals are cached per ``t`` (at most 32 entries).
    """

    CACHE = 32

    def __init__(self, kin: float, cs: float, values: np.ndarray, weights, spec: NonlinearitySpec):
        self.kin = float(kin)
        self.cs = float(cs)
        pos = values > 0  # f and F vanish on (-inf, 0]
        self.values = np.asarray(values, dtype=float)[pos]
        self.weights = np.broadcast_to(np.asarray(weights, dtype=float), np.shape(values))[pos]
        self.spec = spec
        self._cache: dict[float, tuple[float, float]] = {}

    @classmethod
    def from_field(cls, u: Field2D, spec: NonlinearitySpec, cs: Optional[float] = None, method: str = "ewald"):
        if cs is None:
            cs = ga.cs_energy_of(u, method)
        return cls(gr.grad_norm_sq(u), cs, u.values, u.grid.h ** 2, spec)

    @property
    def quad(self) -> float:
        return self.kin + self.cs

    def integrals(self, t: float) -> tuple[float, float]:
        """``(int F(t u), int [f(t u) t u - 2 F(t u)])``."""
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        F, work = _parts(t * self.values, self.weights, self.spec)
        out = (F, work - 2.0 * F)
        if len(self._cache) >= self.CACHE:
            self._cache.pop(next(iter(self._cache)))
        self._cache[t] = out
        return out

    def energy(self, t: float) -> float:
        F, _ = self.integrals(t)
        return 0.5 * t * t * self.quad - F / (t * t)

    def constraint(self, t: float) -> float:
        _, G = self.integrals(t)
        return t * t * self.quad - G / (t * t)


def _fiber(u, spec, method="ewald") -> FiberData:
    if isinstance(u, FiberData):
        return u
    return FiberData.from_field(u, spec, method=method)


def fiber_energy(u, spec: NonlinearitySpec, t: float) -> float:
    """``E(u_t) = (t^2/2)(kin + cs) - t^-2 int F(t u)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    return _fiber(u, spec).energy(t)


def fiber_constraint(u, spec: NonlinearitySpec, t: float) -> float:
    """``J(u_t) = t^2 (kin + cs) - t^-2 int [f(tu) tu - 2F(tu)]``."""
    if not t > 0:
        raise ValueError("t must be positive")
    return _fiber(u, spec).constraint(t)


@dataclass
class Projection:
    t_u: float
    E_at_tu: float


def _signed_constraint(fd: FiberData, logt: float) -> float:
    t = math.exp(logt)
    try:
        return fd.constraint(t) / (t * t * fd.quad)
    except Overflow:
        # the nonlinear term has blown past the cap: J(u_t) is hugely negative
        return -1.0


def project_to_manifold(u, spec: NonlinearitySpec, verify: bool = True) -> Projection:
    """Unique ``t_u`` with ``J(u_{t_u}) = 0`` (Lemma 2.5) and ``E(u_{t_u})``.

    The bracket is grown geometrically from ``t = 1`` within
    ``[1e-6, 1e6]``; the root is then polished with Brent's method on
    ``log t``.
    """
    fd = _fiber(u, spec)
    if fd.quad <= 0 or fd.values.size == 0:
        raise NoBracket("fiber constraint has no sign change for a field without positive part")
    g0 = _signed_constraint(fd, 0.0)
    if g0 == 0.0:
        t_u = 1.0
    else:
        lo = hi = 0.0
        step = math.log(2.0)
        while True:
            if g0 > 0:
                lo, hi = hi, hi + step
                ghi = _signed_constraint(fd, hi)
                if ghi <= 0:
                    break
            else:
                lo, hi = lo - step, lo
                glo = _signed_constraint(fd, lo)
                if glo >= 0:
                    break
            step *= 2.0
            if math.exp(hi) > T_MAX or math.exp(lo) < T_MIN:
                raise NoBracket("no sign change of J(u_t) for t in [1e-6, 1e6]")
        t_u = math.exp(brentq(lambda s: _signed_constraint(fd, s), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    E = fd.energy(t_u)
    if verify:
        for fac in (0.99, 1.01):
            try:
                other = fd.energy(t_u * fac)
            except Overflow:
                continue
            if not other < E:
                raise NotUnique(f"E(u_t) at t={t_u * fac:.6g} is not below the value at t_u={t_u:.6g}")
    return Projection(t_u, E)


def max_fiber_energy(u, spec: NonlinearitySpec, bracket: Optional[tuple[float, float]] = None) -> Projection:
    """Maximize ``t -> E(u_t)`` by golden-section search on ``log t``.

    Without a bracket, one is found by geometric expansion around ``t = 1``.
    """
    fd = _fiber(u, spec)

    def neg(s: float) -> float:
        try:
            return -fd.energy(math.exp(s))
        except Overflow:
            return math.inf

    if bracket is None:
        a, b = -0.5, 0.5
        while neg(a) < neg(0.5 * (a + b)) and a > math.log(T_MIN):
            a -= 1.0
        while neg(b) < neg(0.5 * (a + b)) and b < math.log(T_MAX):
            b += 1.0
        grid = np.linspace(a, b, 41)
        vals = np.array([neg(s) for s in grid])
        i = int(np.clip(np.argmin(vals), 1, len(grid) - 2))
        br = (grid[i - 1], grid[i], grid[i + 1])
    else:
        lo, hi = math.log(bracket[0]), math.log(bracket[1])
        br = (lo, 0.5 * (lo + hi), hi)
    res = minimize_scalar(neg, bracket=br, method="golden", tol=1e-12)
    t = math.exp(res.x)
    return Projection(t, fd.energy(t))


# -- residuals and multiplier ----------------------------------------------

def pohozaev_residual(u: Field2D, spec: NonlinearitySpec, lam: float, bd: Optional[EnergyBreakdown] = None) -> float:
    """``lambda int u^2 + 2 int (A1^2 + A2^2) u^2 - 2 int F(u)``."""
    bd = bd or breakdown(u, spec)
    return lam * bd.mass + 2.0 * bd.cs - 2.0 * bd.potential


def nehari_residual(u: Field2D, spec: NonlinearitySpec, lam: float, bd: Optional[EnergyBreakdown] = None) -> float:
    """``int [|grad u|^2 + 3 (A1^2 + A2^2) u^2] + lambda int u^2 - int f(u) u``."""
    bd = bd or breakdown(u, spec)
    return bd.kinetic + 3.0 * bd.cs + lam * bd.mass - bd.nonlinear_work


@dataclass
class Multipliers:
    lambda_raw: float
    lambda_manifold: float


def lagrange_multiplier(u: Field2D, spec: NonlinearitySpec, bd: Optional[EnergyBreakdown] = None) -> Multipliers:
    """Eq. (lambda0): raw form and the form using ``J(u) = 0``."""
    bd = bd or breakdown(u, spec)
    if bd.mass <= 0:
        raise ZeroMass("Lagrange multiplier undefined for zero mass")
    return Multipliers(bd.lambda_raw, bd.lambda_manifold)


def lower_bound_gap(bd: EnergyBreakdown, theta: float) -> float:
    """Lemma 2.6 chain: ``E - J/(theta-2) - (theta-4)/(2(theta-2)) kin`` (>= 0 under AR)."""
    return bd.E - bd.J / (theta - 2.0) - (theta - 4.0) / (2.0 * (theta - 2.0)) * bd.kinetic


# -- Gagliardo-Nirenberg / Trudinger-Moser diagnostics ----------------------

def gn_ratio(u: Field2D, p: float) -> float:
    """``|u|_p^p / (|grad u|_2^(p-2) |u|_2^2)``, an empirical lower bound for ``C_p`` of Eq. (GN)."""
    if not p > 2:
        raise ValueError("GN needs p > 2")
    g = gr.grad_norm_sq(u)
    m = gr.lp_norm(u, 2) ** 2
    if g == 0 or m == 0:
        return 0.0
    return gr.lp_norm(u, p) ** p / (g ** ((p - 2) / 2) * m)


def tm_integral(u: Field2D, alpha: float) -> float:
    """``int (e^{alpha u^2} - 1)`` after rescaling ``u`` to ``|grad u|_2 = 1`` (Lemma 2.3)."""
    g = gr.grad_norm_sq(u)
    if g == 0:
        return 0.0
    v = u.values / math.sqrt(g)
    return float(u.grid.h ** 2 * np.sum(np.expm1(alpha * v * v)))
