"""Normalized ground states by projected gradient flow on the mass sphere.

The ground state is a saddle of ``E`` on ``S(a)``: a maximum along each
fiber ``t -> u_t`` and a minimum across fibers.  The flow therefore
minimizes ``Psi(u) = max_t E(u_t)``: each step takes a preconditioned
tangential gradient step, restores the mass, and (every
``project_every`` steps, default every step) moves back to the Pohozaev
manifold ``M(a)`` along the fiber.  Steps that raise the energy are rejected
and the step size is halved; 20 consecutive accepts grow it by 10%.

The preconditioner is ``(c - Lap)^-1`` with ``c`` the current estimate of
the Lagrange multiplier; tangency is taken in the matching inner product so
the step preserves the mass to first order.

The same engine drives the 2-D grid and the radial finite-volume
discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol, TextIO, Union

import numpy as np

from . import functional as fn
from . import gauge as ga
from . import grid as gr
from . import nonlin as nl
from . import radial as rd
from .errors import ConfigError, DomainTooSmall, MaxSteps, NoFixedPoint, NotSupercritical
from .functional import EnergyBreakdown, FiberData
from .grid import Field2D, Grid
from .nonlin import NonlinearitySpec, TruncationMode


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class GaussianInit:
    """``t psi(t x)`` with ``psi = a pi^-1/2 e^{-|x|^2/2}``; ``sigma = 1/t``.

    ``sigma=None`` picks ``t`` by projecting ``psi`` onto ``M(a)``.
    """

    sigma: Optional[float] = None


@dataclass(frozen=True)
class MoserLikeInit:
    n: int = 10
    rho: float = 1.0


@dataclass(frozen=True)
class FromFileInit:
    path: str


Init = Union[GaussianInit, MoserLikeInit, FromFileInit]


@dataclass(frozen=True)
class SolverConfig:
    a: float
    dt: float = 0.5
    max_steps: int = 3000
    grad_tol: float = 1e-6
    j_tol: float = 1e-6
    init: Init = GaussianInit()
    seed: int = 0
    noise: float = 0.02
    project_every: int = 1
    precondition: bool = True
    method: str = "ewald"
    log_every: int = 10
    check_hypotheses: bool = True
    newton: bool = True
    newton_switch: float = 1e-3
    newton_max_iter: int = 25

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a == 0:
            raise ConfigError("solver.a: a must be nonzero")
        if not self.dt > 0:
            raise ConfigError("solver.dt: dt must be positive")
        if int(self.max_steps) < 1:
            raise ConfigError("solver.max_steps: must be a positive integer")
        if not (self.grad_tol > 0 and self.j_tol > 0):
            raise ConfigError("solver.grad_tol/j_tol: tolerances must be positive")
        if int(self.project_every) < 1:
            raise ConfigError("solver.project_every: must be >= 1")
        if self.method not in ga.METHODS:
            raise ConfigError(f"solver.method: expected one of {ga.METHODS}")

    @property
    def mass(self) -> float:
        return self.a * self.a


@dataclass
class SolutionRecord:
    u: Union[Field2D, rd.RadialField]
    lam: float
    breakdown: EnergyBreakdown
    pohozaev_res: float
    nehari_res: float
    linf: float
    steps: int
    converged: bool
    grad_rel: float
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "lambda": self.lam,
            "breakdown": self.breakdown.to_dict(),
            "pohozaev_res": self.pohozaev_res,
            "nehari_res": self.nehari_res,
            "linf": self.linf,
            "steps": self.steps,
            "converged": self.converged,
            "grad_rel": self.grad_rel,
            "min_value": float(np.min(self.u.values)),
        }
        if isinstance(self.u, Field2D):
            out["grid"] = {"L": self.u.grid.L, "N": self.u.grid.N}
        else:
            out["radial"] = {"r_max": self.u.r_max, "M": self.u.M}
        out.update(self.extra)
        return out


# -- discretizations ---------------------------------------------------------

class Discretization(Protocol):
    def inner(self, a: np.ndarray, b: np.ndarray) -> float: ...
    def kinetic(self, v: np.ndarray) -> float: ...
    def neg_laplacian(self, v: np.ndarray) -> np.ndarray: ...
    def gauge(self, v: np.ndarray) -> tuple[float, np.ndarray]: ...
    def precondition(self, g: np.ndarray, c: float) -> np.ndarray: ...
    def scale(self, v: np.ndarray, t: float) -> np.ndarray: ...
    def boundary_max(self, v: np.ndarray) -> float: ...
    @property
    def weights(self): ...


class Grid2D:
    def __init__(self, grid: Grid, method: str = "ewald"):
        self.grid = grid
        self.method = method
        self.weights = grid.h ** 2

    def inner(self, a, b):
        return float(self.weights * np.sum(a * b))

    def kinetic(self, v):
        return gr.grad_norm_sq(Field2D(self.grid, v))

    def neg_laplacian(self, v):
        return np.fft.ifft2(self.grid.k2 * np.fft.fft2(v)).real

    def gauge(self, v):
        G = ga.gauge_fields(Field2D(self.grid, v), self.method)
        return G.cs_energy, G.potential

    def precondition(self, g, c):
        return np.fft.ifft2(np.fft.fft2(g) / (c + self.grid.k2)).real

    def scale(self, v, t):
        return gr.scale_field(Field2D(self.grid, v), t).values

    def boundary_max(self, v):
        return gr.boundary_max(Field2D(self.grid, v))

    def wrap(self, v):
        return Field2D(self.grid, v)

    def recenter(self, v):
        """Spectrally translate ``v`` so its ``v^2``-barycenter sits at the origin node."""
        x1, x2 = self.grid.mesh
        w = v * v
        c1, c2 = float(np.sum(w * x1) / np.sum(w)), float(np.sum(w * x2) / np.sum(w))
        k1, k2 = self.grid.kmesh
        vh = np.fft.fft2(v)
        N = self.grid.N
        vh[N // 2, :] = 0.0
        vh[:, N // 2] = 0.0
        return np.fft.ifft2(vh * np.exp(1j * (k1 * c1 + k2 * c2))).real

    def null_modes(self, v):
        """Translation generators ``d_j v``: near-kernel of the Hessian on the periodic grid."""
        return [d.values for d in gr.gradient(Field2D(self.grid, v))]


class Radial1D(rd.RadialOperators):
    @property
    def weights(self):
        return self.w

    def inner(self, a, b):
        return float(np.sum(self.w * a * b))

    def wrap(self, v):
        return rd.RadialField(self.r_max, self.M, v)

    def null_modes(self, v):
        return []

    def recenter(self, v):
        return v


@dataclass
class _State:
    v: np.ndarray
    kin: float
    cs: float
    potential: float
    work: float
    mass: float
    E: float
    J: float
    grad: np.ndarray

    @property
    def scale(self) -> float:
        return self.kin + self.cs


def _evaluate(disc, spec: NonlinearitySpec, v: np.ndarray) -> _State:
    cs, V = disc.gauge(v)
    kin = disc.kinetic(v)
    F = nl.eval_F(spec, v)
    f = nl.eval_f(spec, v)
    w = disc.weights
    pot = float(np.sum(w * F))
    work = float(np.sum(w * f * v))
    mass = float(np.sum(w * v * v))
    E = 0.5 * (kin + cs) - pot
    J = kin + cs - (work - 2 * pot)
    grad = disc.neg_laplacian(v) + V * v - f
    return _State(v, kin, cs, pot, work, mass, E, J, grad)


def _gradient(disc, spec: NonlinearitySpec, v: np.ndarray) -> np.ndarray:
    """``E'(v)`` alone (skips the primitive ``F``, which may need quadrature)."""
    _, V = disc.gauge(v)
    return disc.neg_laplacian(v) + V * v - nl.eval_f(spec, v)


def _normalize(disc, v: np.ndarray, mass: float) -> np.ndarray:
    return v * math.sqrt(mass / disc.inner(v, v))


def _fiber_project(disc, spec, v: np.ndarray, kin: float, cs: float, mass: float) -> tuple[np.ndarray, float]:
    fd = FiberData(kin, cs, v, disc.weights, spec)
    t = fn.project_to_manifold(fd, spec, verify=False).t_u
    if abs(t - 1.0) < 1e-15:
        return v, 1.0
    return _normalize(disc, disc.scale(v, t), mass), t


def linf_norm(u) -> float:
    return float(np.max(np.abs(u.values))) if np.size(u.values) else 0.0


PROGRESS_HEADER = "step,E,J,gradnorm,mass"


def _flow(disc, spec: NonlinearitySpec, cfg: SolverConfig, v0: np.ndarray, progress: Optional[TextIO] = None,
          callback: Optional[Callable] = None):
    mass = cfg.mass
    v = _normalize(disc, v0, mass)
    st = _evaluate(disc, spec, v)
    v, _ = _fiber_project(disc, spec, v, st.kin, st.cs, mass)
    st = _evaluate(disc, spec, v)
    dt = cfg.dt
    accepts = 0
    history = []
    converged = False
    rel = math.inf
    best = best_checkpoint = math.inf
    step = 0
    if progress is not None:
        progress.write(PROGRESS_HEADER + "\n")
    while True:
        g = st.grad
        mu = disc.inner(g, v) / disc.inner(v, v)
        g_tan = g - mu * v
        gnorm = math.sqrt(disc.inner(g, g))
        rel = math.sqrt(disc.inner(g_tan, g_tan)) / gnorm if gnorm > 0 else 0.0
        history.append((step, st.E, st.J, rel, st.mass))
        if progress is not None and (step % max(cfg.log_every, 1) == 0):
            progress.write(f"{step},{st.E:.16e},{st.J:.6e},{rel:.6e},{st.mass:.16e}\n")
        if callback is not None:
            callback(step, st, rel)
        j_ok = abs(st.J) <= cfg.j_tol * st.scale
        if rel <= cfg.grad_tol:
            if j_ok:
                converged = True
                break
            v, _ = _fiber_project(disc, spec, v, st.kin, st.cs, mass)
            st = _evaluate(disc, spec, v)
            continue
        if step >= cfg.max_steps or dt < 1e-14:
            break
        if cfg.newton and rel <= cfg.newton_switch:
            break
        best = min(best, rel)
        if step % 100 == 0:
            if cfg.newton and best > 0.5 * best_checkpoint:
                break  # stagnation: hand over to the Newton polish
            best_checkpoint = best
        step += 1
        if cfg.precondition:
            c = max(-mu, 1e-2 * st.kin / st.mass)
            Pg = disc.precondition(g, c)
            Pv = disc.precondition(v, c)
            d = Pg - (disc.inner(v, Pg) / disc.inner(v, Pv)) * Pv
        else:
            d = g_tan
        while True:
            trial = _normalize(disc, v - dt * d, mass)
            project = step % cfg.project_every == 0
            if project:
                ts = _evaluate(disc, spec, trial)
                trial, _ = _fiber_project(disc, spec, trial, ts.kin, ts.cs, mass)
            new = _evaluate(disc, spec, trial)
            if cfg.project_every == 1 or not project:
                ok = new.E <= st.E + 1e-12 * max(1.0, abs(st.E))
            else:
                ok = True
            if ok:
                break
            dt *= 0.5
            accepts = 0
            if dt < 1e-14:
                break
        if dt < 1e-14:
            break
        v, st = trial, new
        accepts += 1
        if accepts % 20 == 0:
            dt *= 1.1
    newton_iters = 0
    if not converged and cfg.newton:
        # translations are a continuum symmetry but not a discrete one: an
        # off-node center (e.g. after noisy initial data) leaves an aliased
        # residual that Newton cannot remove at marginal resolution
        v = _normalize(disc, disc.recenter(st.v), mass)
        st = _evaluate(disc, spec, v)
        st, newton_iters, converged, rel = _newton_polish(disc, spec, cfg, st, history, progress, step)
    if progress is not None:
        progress.write(f"{step + newton_iters},{st.E:.16e},{st.J:.6e},{rel:.6e},{st.mass:.16e}\n")
    # record whether the step budget (rather than a stall) ended the flow
    exhausted = step >= cfg.max_steps
    return st, step + newton_iters, converged, rel, history, exhausted


def _tangential_rel(disc, st: _State) -> tuple[float, float]:
    """(relative tangential gradient norm, multiplier estimate -<g,u>/|u|^2)."""
    g, v = st.grad, st.v
    mu = disc.inner(g, v) / disc.inner(v, v)
    g_tan = g - mu * v
    gnorm = math.sqrt(disc.inner(g, g))
    return (math.sqrt(disc.inner(g_tan, g_tan)) / gnorm if gnorm > 0 else 0.0), -mu


def _newton_polish(disc, spec, cfg: SolverConfig, st: _State, history, progress, step0: int):
    """Newton-GMRES on ``E'(u) + lambda u = 0``, ``|u|^2 = a^2``.

    The ground state is a saddle of ``E`` on ``S(a)``, and the continuum
    fiber projection is only consistent with the discrete energy up to
    discretization error, so the flow alone stalls at that level.  Newton's
    method on the discrete Euler-Lagrange system converges to the discrete
    critical point regardless of its Morse index.  Jacobian-vector products
    use central differences of the discrete gradient; the preconditioner is
    ``(lambda - Lap)^-1``.
    """
    from scipy.sparse.linalg import LinearOperator, gmres

    mass = cfg.mass
    v = st.v
    shape = v.shape
    n = v.size
    rel, lam = _tangential_rel(disc, st)
    w = disc.weights
    for it in range(1, cfg.newton_max_iter + 1):
        c0 = max(lam, 1e-2 * st.kin / st.mass)
        res = np.concatenate([(st.grad + lam * v).ravel(), [0.5 * (disc.inner(v, v) - mass)]])
        vscale = float(np.max(np.abs(v)))

        def matvec(z, v=v, lam=lam):
            d = z[:n].reshape(shape)
            dn = float(np.max(np.abs(d)))
            if dn == 0.0:
                jd = np.zeros(shape)
            else:
                eps = 1e-5 * vscale / dn
                gp = _gradient(disc, spec, v + eps * d)
                gm = _gradient(disc, spec, v - eps * d)
                jd = (gp - gm) / (2 * eps)
            out = jd + lam * d + z[n] * v
            return np.concatenate([out.ravel(), [float(np.sum(w * v * d))]])

        def prec(z, c0=c0):
            return np.concatenate([disc.precondition(z[:n].reshape(shape), c0).ravel(), [z[n] / mass]])

        A = LinearOperator((n + 1, n + 1), matvec=matvec, dtype=float)
        M = LinearOperator((n + 1, n + 1), matvec=prec, dtype=float)
        sol, _ = gmres(A, -res, M=M, rtol=1e-4, restart=60, maxiter=6)
        dv, dlam = sol[:n].reshape(shape), float(sol[n])
        # the Hessian is (nearly) singular along translations; GMRES leaves
        # arbitrary components there, which only move the solution sideways
        basis = []
        for m in disc.null_modes(v):
            for b in basis:
                m = m - disc.inner(m, b) * b
            nm = math.sqrt(disc.inner(m, m))
            if nm > 0:
                basis.append(m / nm)
        for b in basis:
            dv = dv - disc.inner(dv, b) * b
        lam_old, v_old, rel_old = lam, v, rel
        alpha = 1.0
        while True:
            cand = _normalize(disc, v_old + alpha * dv, mass)
            new = _evaluate(disc, spec, cand)
            new_rel, _ = _tangential_rel(disc, new)
            if new_rel < rel_old or alpha < 1e-3:
                break
            alpha *= 0.5
        v, st, lam = cand, new, lam_old + alpha * dlam
        rel, lam_est = _tangential_rel(disc, st)
        history.append((step0 + it, st.E, st.J, rel, st.mass))
        if progress is not None:
            progress.write(f"{step0 + it},{st.E:.16e},{st.J:.6e},{rel:.6e},{st.mass:.16e}\n")
        lam = lam_est
        if rel <= cfg.grad_tol:
            conv = abs(st.J) <= cfg.j_tol * st.scale
            return st, it, conv, rel
        if new_rel >= rel_old and alpha < 1e-3:
            break
    return st, it, False, rel


def _record(disc, spec: NonlinearitySpec, st: _State, steps: int, converged: bool, rel: float, history) -> SolutionRecord:
    bd = fn.assemble(st.kin, st.cs, st.potential, st.work, st.mass)
    lam = -disc.inner(st.grad, st.v) / st.mass
    poho = lam * st.mass + 2 * st.cs - 2 * st.potential
    neh = st.kin + 3 * st.cs + lam * st.mass - st.work
    return SolutionRecord(
        disc.wrap(st.v), lam, bd, poho, neh, float(np.max(np.abs(st.v))), steps, converged, rel, history
    )


# -- initial data --------------------------------------------------------------

def _reference_profile(a: float) -> rd.RadialField:
    return rd.radial_sample(lambda r: abs(a) / math.sqrt(math.pi) * np.exp(-0.5 * r * r), 14.0, 4001)


def _radial_fiber(prof: rd.RadialField, spec: NonlinearitySpec) -> FiberData:
    ops = rd.RadialOperators(prof.r_max, prof.M)
    du = np.gradient(prof.values, prof.dr)
    from scipy.integrate import simpson

    kin = float(2 * math.pi * simpson(prof.r * du * du, dx=prof.dr))
    cs = rd.radial_cs_energy(prof)
    return FiberData(kin, cs, prof.values, ops.w, spec)


def gaussian_scale(spec: NonlinearitySpec, a: float) -> float:
    """Fiber scale ``t`` projecting ``psi = a pi^-1/2 e^{-|x|^2/2}`` onto ``M(a)``."""
    prof = _reference_profile(a)
    return fn.project_to_manifold(_radial_fiber(prof, spec), spec, verify=False).t_u


def _smooth_noise(x1: np.ndarray, x2: np.ndarray, sigma: float, rng: np.random.Generator, modes: int = 6) -> np.ndarray:
    out = np.zeros(np.broadcast(x1, x2).shape)
    for _ in range(modes):
        k = rng.normal(size=2) / sigma
        out += rng.normal() * np.cos(k[0] * x1 + k[1] * x2 + rng.uniform(0, 2 * np.pi))
    return out / math.sqrt(modes)


def initial_profile(spec: NonlinearitySpec, cfg: SolverConfig) -> Callable[[np.ndarray], np.ndarray]:
    """Radial initial profile ``r -> u0(r)`` (before noise and mass fixing)."""
    init = cfg.init
    a = abs(cfg.a)
    if isinstance(init, GaussianInit):
        t = 1.0 / init.sigma if init.sigma else gaussian_scale(spec, a)
        return lambda r: t * a / math.sqrt(math.pi) * np.exp(-0.5 * (t * r) ** 2)
    if isinstance(init, MoserLikeInit):
        from . import moser

        params = moser.moser_params(a, init.rho, init.n)
        prof = rd.radial_sample(lambda r: moser.moser_profile(params, r), params.r_n * 1.01, 8001)
        t = fn.project_to_manifold(_radial_fiber(prof, spec), spec, verify=False).t_u
        return lambda r: t * moser.moser_profile(params, t * r)
    raise ConfigError("solver.init: FromFile initialization has no radial profile")


def initial_field(spec: NonlinearitySpec, cfg: SolverConfig, grid: Grid) -> np.ndarray:
    if isinstance(cfg.init, FromFileInit):
        u = gr.read_field(cfg.init.path)
        if u.grid != grid:
            raise ConfigError("solver.init.path: stored grid does not match the run grid")
        v = u.values
    else:
        v = initial_profile(spec, cfg)(grid.r)
    if cfg.noise:
        rng = np.random.default_rng(cfg.seed)
        scale = float(np.sqrt(np.sum(grid.r ** 2 * v * v) / max(np.sum(v * v), 1e-300)))
        x1, x2 = grid.mesh
        v = v * (1.0 + cfg.noise * _smooth_noise(x1, x2, max(scale, grid.h), rng))
    return v


def _check_spec(spec: NonlinearitySpec) -> None:
    if spec.is_zero:
        raise ConfigError("spec: f = 0 has no normalized ground state")
    samples = default_samples(spec)
    ar = nl.check_ar(spec, samples)
    if not ar.holds:
        raise ConfigError(f"spec: (f2) AR condition fails (theta F/(f s) = {ar.worst_ratio:.6g} at s = {ar.worst_s:.4g})")
    mono = nl.check_fbar_monotone(spec, samples)
    if not mono.holds:
        raise ConfigError(f"spec: (f3) Fbar/s^4 not strictly increasing near s = {mono.violations[0][0]:.4g}")


def default_samples(spec: NonlinearitySpec, n: int = 240) -> np.ndarray:
    """Positive sample grid for hypothesis checks, kept below the exponent cap."""
    s = np.geomspace(1e-3, 20.0, n)
    keep = []
    for v in s:
        try:
            nl.eval_f(spec, v * 1.0000001)
            nl.eval_F(spec, v)
        except Exception:
            break
        keep.append(v)
    s = np.asarray(keep)
    if spec.truncation is not None:
        s = s[np.abs(s - spec.truncation.R) > 1e-9 * spec.truncation.R]
    return s


# -- public solvers ------------------------------------------------------------

def euler_gradient(u: Field2D, spec: NonlinearitySpec, method: str = "ewald") -> Field2D:
    """L2 gradient ``-Lap u + (A0 + A1^2 + A2^2) u - f(u)`` of ``E``."""
    disc = Grid2D(u.grid, method)
    cs, V = disc.gauge(u.values)
    return u.like(disc.neg_laplacian(u.values) + V * u.values - nl.eval_f(spec, u.values), "dE")


def minimize_on_sphere(
    spec: NonlinearitySpec,
    cfg: SolverConfig,
    grid: Grid,
    progress: Optional[TextIO] = None,
    callback: Optional[Callable] = None,
    check_domain: bool = True,
) -> SolutionRecord:
    """2-D ground state on ``S(a)``.

    Raises ``MaxSteps`` (with the record in ``err.record``) when the step
    budget is exhausted, and ``DomainTooSmall`` (likewise) when the final
    field does not decay below 1e-8 on the boundary ring, whether it
    converged or the iteration stalled.
    """
    if cfg.check_hypotheses:
        _check_spec(spec)
    disc = Grid2D(grid, cfg.method)
    v0 = initial_field(spec, cfg, grid)
    st, steps, conv, rel, hist, exhausted = _flow(disc, spec, cfg, v0, progress, callback)
    rec = _record(disc, spec, st, steps, conv, rel, hist)
    rec.extra["grad_tol"] = cfg.grad_tol
    rec.extra["steps_exhausted"] = exhausted
    _finish(rec, disc, check_domain)
    return rec


def minimize_radial(spec: NonlinearitySpec, cfg: SolverConfig, r_max: float, M: int,
                    progress: Optional[TextIO] = None, callback: Optional[Callable] = None,
                    check_domain: bool = True) -> SolutionRecord:
    """Radial ground state with the finite-volume operators of :mod:`radial`."""
    if cfg.check_hypotheses:
        _check_spec(spec)
    disc = Radial1D(r_max, M)
    if isinstance(cfg.init, FromFileInit):
        v0 = rd.read_profile(cfg.init.path)(disc.r)
    else:
        v0 = initial_profile(spec, cfg)(disc.r)
    st, steps, conv, rel, hist, exhausted = _flow(disc, spec, cfg, v0, progress, callback)
    rec = _record(disc, spec, st, steps, conv, rel, hist)
    rec.extra["grad_tol"] = cfg.grad_tol
    rec.extra["steps_exhausted"] = exhausted
    _finish(rec, disc, check_domain)
    return rec


def _finish(rec: SolutionRecord, disc, check_domain: bool) -> None:
    b = disc.boundary_max(rec.u.values)
    rec.extra["boundary_max"] = b
    # an undecayed boundary ring is reported unless the step budget ran out:
    # the periodic problem on a too-small box is a different problem, and it
    # is also what stalls the flow there
    if check_domain and b > gr.BOUNDARY_TOL and (rec.converged or not rec.extra.get("steps_exhausted")):
        state = "converged" if rec.converged else f"not converged after {rec.steps} steps"
        err = DomainTooSmall(f"|u| = {b:.3e} on the boundary ring exceeds {gr.BOUNDARY_TOL:.0e} ({state}); enlarge L")
        err.record = rec
        raise err
    if not rec.converged:
        if rec.grad_rel <= rec.extra.get("grad_tol", 0.0):
            b_ = rec.breakdown
            msg = (f"gradient converged but |J|/(kin+cs) = {abs(b_.J) / b_.scale:.3e} exceeds j_tol; "
                   "the discretization is too coarse for the solution (refine N)")
        else:
            msg = f"not converged after {rec.steps} steps (relative gradient {rec.grad_rel:.3e})"
        err = MaxSteps(msg)
        err.record = rec
        raise err


def auto_grid(spec: NonlinearitySpec, a: float, N: int, decay: float = 2e-10, cfg: Optional[SolverConfig] = None) -> Grid:
    """Square domain sized from a cheap radial solve.

    ``L`` is the radius beyond which the radial ground state stays below
    ``decay * u(0)``; the solution's length scale changes strongly with ``a``
    and the nonlinearity, so fixed domains are rarely adequate.
    """
    base = cfg or SolverConfig(a=a)
    t = gaussian_scale(spec, a)
    r_max = 40.0 / t
    rcfg = replace(base, a=a, grad_tol=1e-8, j_tol=1.0, init=GaussianInit(), noise=0.0, check_hypotheses=False,
                   max_steps=4000)
    try:
        rec = minimize_radial(spec, rcfg, r_max, 4001, check_domain=False)
    except MaxSteps as err:
        rec = err.record
    u = np.abs(rec.u.values)
    above = np.nonzero(u >= decay * u[0])[0]
    r_star = rec.u.r[above[-1] + 1] if above.size and above[-1] + 1 < rec.u.M else r_max
    return gr.make_grid(float(r_star), N)


@dataclass
class SweepRow:
    a: float
    m: float
    lam: float
    converged: bool
    L: float
    monotone_ok: bool = True


def mass_sweep(
    spec: NonlinearitySpec,
    a_list,
    cfg: SolverConfig,
    N: int = 512,
    grid: Optional[Grid] = None,
    slack: float = 1e-4,
) -> list[SweepRow]:
    """``m(a)`` along increasing masses; each row flags a strict increase beyond ``slack``.

    Without ``grid`` each mass gets its own domain from :func:`auto_grid`
    (the solution's length scale changes with ``a``).
    """
    a_list = [float(a) for a in a_list]
    if any(a <= 0 for a in a_list) or any(b <= a for a, b in zip(a_list, a_list[1:])):
        raise ConfigError("sweep.a_list: masses must be positive and strictly increasing")
    rows = []
    for a in a_list:
        g = grid or auto_grid(spec, a, N, cfg=cfg)
        rec = minimize_on_sphere(spec, replace(cfg, a=a), g)
        rows.append(SweepRow(a, rec.breakdown.E, rec.lam, rec.converged, g.L))
    for prev, row in zip(rows, rows[1:]):
        row.monotone_ok = row.m <= prev.m + slack
    return rows


def solve_supercritical(
    spec: NonlinearitySpec,
    cfg: SolverConfig,
    grid: Union[Grid, Callable[[NonlinearitySpec], Grid]],
    R_init: float,
    max_outer: int = 8,
    mode: TruncationMode | str = TruncationMode.SUBCRITICAL_DELTA,
    progress: Optional[TextIO] = None,
) -> SolutionRecord:
    """Truncation / L-infinity feedback loop of Theorems 1.5-1.6.

    Solve with ``f^{R, delta_bar}``; accept when ``|u|_inf <= R`` (then the
    truncated and original nonlinearities agree on the range of ``u``),
    otherwise set ``R <- max(2R, 1.1 |u|_inf)`` and repeat.  ``grid`` may be
    a callable producing a grid for each truncated spec.
    """
    if not isinstance(spec.family, nl.Supercritical):
        raise NotSupercritical("solve_supercritical needs a Supercritical spec")
    base = nl.untruncated(spec)
    R = float(R_init)
    trace = []
    rec = None
    for k in range(int(max_outer)):
        tspec = nl.truncate(base, R, mode)
        g = grid(tspec) if callable(grid) else grid
        try:
            rec = minimize_on_sphere(tspec, cfg, g, progress=progress)
        except (MaxSteps, DomainTooSmall) as err:
            # a pass whose field exceeds R is rejected anyway and only feeds
            # |u|_inf into the R update; the kink of f' at the knot can stall
            # the final digits there, so such passes need not converge
            if err.record.linf <= R:
                raise
            rec = err.record
        linf = rec.linf
        trace.append({"R": R, "linf": linf, "E": rec.breakdown.E, "lambda": rec.lam, "steps": rec.steps,
                      "converged": rec.converged})
        if linf <= R:
            # re-evaluate with the original f: the s > R branch is never touched
            st = _evaluate(Grid2D(g, cfg.method), base, rec.u.values)
            orig = _record(Grid2D(g, cfg.method), base, st, rec.steps, rec.converged, rec.grad_rel, rec.history)
            orig.extra.update(rec.extra)
            orig.extra.update({"original_problem_solved": True, "R": R, "outer_trace": trace,
                               "truncation_mode": TruncationMode(mode).value})
            return orig
        R = max(2 * R, 1.1 * linf)
    rec.extra.update({"original_problem_solved": False, "outer_trace": trace})
    err = NoFixedPoint(f"|u|_inf exceeded R on all {max_outer} outer iterations")
    err.record = rec
    raise err
