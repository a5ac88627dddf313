"""Chern-Simons gauge fields of a real density ``u^2``.

Sign conventions follow the field equations ``d1 A2 - d2 A1 = -u^2/2``,
``d1 A1 + d2 A2 = 0`` and ``d1 A0 = A2 u^2``, ``d2 A0 = -A1 u^2``:

    A1 =  (1/4pi) int (x2 - y2)/|x - y|^2 u(y)^2 dy
    A2 = -(1/4pi) int (x1 - y1)/|x - y|^2 u(y)^2 dy
    A0 = (x1/2pi|x|^2) * (A2 u^2) - (x2/2pi|x|^2) * (A1 u^2)

With these signs a radial ``u`` gives ``(A1, A2) = (x2, -x1) h(|x|)/|x|^2``
with ``h(s) = int_0^s r u^2/2 dr``, ``A0 >= 0``, and
``int A0 u^2 = 2 int (A1^2 + A2^2) u^2``.

All three fields are convolutions with the Riesz-type kernels ``x_j/|x|^2``.
The default discretization splits each kernel with a Gaussian screen: the
smooth far field is summed in real space on the zero-padded grid and the
singular near field is applied through its exact Fourier symbol.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import grid as gr
from .errors import SupportsOverlap
from .grid import Field2D, Grid

METHODS = ("ewald", "spectral", "sampled")
SCREEN_CELLS = 4.0


def riesz_multiplier(j: int):
    """Fourier symbol of ``x_j/|x|^2`` (zero mode set to 0)."""

    def mult(k1, k2):
        kk = k1 * k1 + k2 * k2
        kj = k1 if j == 1 else k2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(kk > 0, -2j * np.pi * kj / kk, 0.0)
        return out

    return mult


def riesz_kernel(j: int, screen: float | None = None):
    """Real-space ``x_j/|x|^2``, optionally Gaussian-smoothed; 0 at the origin."""

    def ker(d1, d2):
        rr = d1 * d1 + d2 * d2
        dj = d1 if j == 1 else d2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(rr > 0, dj / rr, 0.0)
        if screen is not None:
            out = out * -np.expm1(-rr / screen ** 2)
        return out

    return ker


@lru_cache(maxsize=16)
def _riesz_transfers(L: float, N: int, method: str) -> tuple[np.ndarray, np.ndarray]:
    g = Grid(L, N)
    out = []
    for j in (1, 2):
        if method == "ewald":
            s = SCREEN_CELLS * g.h
            T = gr.transfer_function(g, riesz_multiplier(j), riesz_kernel(j, s), s)
        elif method == "spectral":
            T = gr.transfer_function(g, riesz_multiplier(j))
        elif method == "sampled":
            T = gr.transfer_function(g, None, riesz_kernel(j))
        else:
            raise ValueError(f"unknown gauge method {method!r}; expected one of {METHODS}")
        out.append(T)
    return out[0], out[1]


def _pad_fft(v: np.ndarray, N: int) -> np.ndarray:
    pad = np.zeros((2 * N, 2 * N))
    pad[:N, :N] = v
    return np.fft.fft2(pad)


def _crop_ifft(vh: np.ndarray, N: int) -> np.ndarray:
    return np.fft.ifft2(vh).real[:N, :N]


@dataclass(frozen=True, eq=False)
class GaugeFields:
    a0: Field2D
    a1: Field2D
    a2: Field2D
    cs_energy: float

    @property
    def potential(self) -> np.ndarray:
        """``A0 + A1^2 + A2^2``, the coefficient multiplying ``u`` in the equation."""
        return self.a0.values + self.a1.values ** 2 + self.a2.values ** 2


def compute_a12(u: Field2D, method: str = "ewald") -> tuple[Field2D, Field2D]:
    g = u.grid
    T1, T2 = _riesz_transfers(g.L, g.N, method)
    rho = _pad_fft(u.values ** 2, g.N)
    a1 = _crop_ifft(T2 * rho, g.N) / (4 * np.pi)
    a2 = -_crop_ifft(T1 * rho, g.N) / (4 * np.pi)
    return u.like(a1, "A1"), u.like(a2, "A2")


def compute_a0(u: Field2D, a1: Field2D, a2: Field2D, method: str = "ewald") -> Field2D:
    g = u.grid
    T1, T2 = _riesz_transfers(g.L, g.N, method)
    u2 = u.values ** 2
    src = T1 * _pad_fft(a2.values * u2, g.N) - T2 * _pad_fft(a1.values * u2, g.N)
    return u.like(_crop_ifft(src, g.N) / (2 * np.pi), "A0")


def cs_energy(u: Field2D, a1: Field2D, a2: Field2D) -> float:
    """``int (A1^2 + A2^2) u^2``."""
    return float(u.grid.h ** 2 * np.sum((a1.values ** 2 + a2.values ** 2) * u.values ** 2))


def gauge_fields(u: Field2D, method: str = "ewald") -> GaugeFields:
    a1, a2 = compute_a12(u, method)
    a0 = compute_a0(u, a1, a2, method)
    return GaugeFields(a0, a1, a2, cs_energy(u, a1, a2))


def cs_energy_of(u: Field2D, method: str = "ewald") -> float:
    a1, a2 = compute_a12(u, method)
    return cs_energy(u, a1, a2)


def direct_riesz(f: Field2D, probes: Sequence[tuple[int, int]], j: int, refine: int = 1) -> np.ndarray:
    """Brute-force ``int (x_j - y_j)/|x - y|^2 f(y) dy`` at grid-node probes.

    Midpoint rule with the singular cell omitted.  ``refine > 1`` needs ``f``
    to be callable data and is handled by :func:`direct_riesz_func`.
    """
    g = f.grid
    x1, x2 = g.mesh
    out = np.empty(len(probes))
    for n, (i, k) in enumerate(probes):
        d1 = g.x[i] - x1
        d2 = g.x[k] - x2
        rr = d1 * d1 + d2 * d2
        dj = d1 if j == 1 else d2
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(rr > 0, dj / rr, 0.0)
        out[n] = g.h ** 2 * np.sum(w * f.values)
    return out


# -- bounds diagnostics ------------------------------------------------------

@dataclass
class GaugeBoundsReport:
    r: float
    r_hat: float
    ratio_a1: float
    ratio_a2: float
    ratio_gauge1: float
    corpus_size: int
    degenerate: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GaugeBoundsReport":
        return cls(**json.loads(text))


def r_hat(r: float) -> float:
    """Exponent with ``1/r - 1/r_hat = 1/2``."""
    if not 1.0 < r < 2.0:
        raise ValueError(f"r must lie in (1, 2), got {r}")
    return 1.0 / (1.0 / r - 0.5)


def _bounds_single(u: Field2D, r: float, method: str) -> tuple[float, float, float, bool]:
    rh = r_hat(r)
    a1, a2 = compute_a12(u, method)
    u2r = gr.lp_norm(u, 2 * r) ** 2
    if u2r == 0.0:
        return 0.0, 0.0, 0.0, True
    h1 = np.sqrt(gr.grad_norm_sq(u) + gr.lp_norm(u, 2) ** 2)
    ra1 = gr.lp_norm(a1, rh) / u2r
    ra2 = gr.lp_norm(a2, rh) / u2r
    g1 = max(gr.lp_norm(u.like(a1.values * u.values), 2), gr.lp_norm(u.like(a2.values * u.values), 2)) / h1 ** 3
    return ra1, ra2, g1, False


def gauge_bounds_report(u: Field2D | Iterable[Field2D], r: float, method: str = "ewald") -> GaugeBoundsReport:
    """Empirical ratios ``|A_j|_rhat / |u|_2r^2`` and ``|A_j u|_2 / ||u||_H1^3``.

    A single field or a corpus may be passed; ratios are maxima over the
    corpus, i.e. empirical lower bounds for the constants ``C_r`` and
    ``C_r bar``.
    """
    rh = r_hat(r)
    corpus = [u] if isinstance(u, Field2D) else list(u)
    rows = [_bounds_single(v, r, method) for v in corpus]
    live = [row for row in rows if not row[3]]
    if not live:
        return GaugeBoundsReport(r, rh, 0.0, 0.0, 0.0, len(corpus), degenerate=True)
    return GaugeBoundsReport(
        r,
        rh,
        max(row[0] for row in live),
        max(row[1] for row in live),
        max(row[2] for row in live),
        len(corpus),
    )


# -- disjoint supports -------------------------------------------------------

def _support(v: np.ndarray, rel: float = 1e-12) -> np.ndarray:
    m = np.max(np.abs(v))
    if m == 0.0:
        return np.zeros(v.shape, dtype=bool)
    return np.abs(v) > rel * m


def _scaled_support(u: Field2D, t: float) -> np.ndarray:
    """Nodes ``x`` with ``t x`` in the (one-cell dilated) support of ``u``."""
    g = u.grid
    supp = _support(u.values)
    supp = supp | np.roll(supp, 1, 0) | np.roll(supp, -1, 0)
    supp = supp | np.roll(supp, 1, 1) | np.roll(supp, -1, 1)
    idx = np.rint((t * g.x + g.L) / g.h).astype(int)
    ok = (idx >= 0) & (idx < g.N)
    idx = np.clip(idx, 0, g.N - 1)
    return supp[np.ix_(idx, idx)] & np.outer(ok, ok)


def scale_compact(u: Field2D, t: float) -> Field2D:
    """``t u(t x)`` with the interpolation ringing outside the scaled support removed.

    For compactly supported ``u`` the continuum ``u_t`` vanishes wherever
    ``t x`` leaves ``supp u``; the trigonometric interpolant does not, which
    would spoil the disjoint-support precondition of Lemma A.5.
    """
    ut = gr.scale_field(u, t)
    return ut.like(np.where(_scaled_support(u, t), ut.values, 0.0))


def disjoint_support_additivity_check(
    u: Field2D, v: Field2D, t_list: Sequence[float], method: str = "ewald"
) -> np.ndarray:
    """``|CS(u_t + v) - CS(u_t) - CS(v)|`` for each ``t``, with ``u_t = t u(t x)``.

    Raises ``SupportsOverlap`` when the numerical supports of ``u_t`` and
    ``v`` intersect for some ``t``.
    """
    out = []
    cs_v = cs_energy_of(v, method)
    for t in t_list:
        ut = scale_compact(u, t)
        if np.any(_support(ut.values) & _support(v.values)):
            raise SupportsOverlap(f"supports of u_t and v intersect at t={t}")
        w = ut.like(ut.values + v.values)
        out.append(abs(cs_energy_of(w, method) - cs_energy_of(ut, method) - cs_v))
    return np.asarray(out)
