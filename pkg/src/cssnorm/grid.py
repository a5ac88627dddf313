"""Square truncated-domain discretization of the plane.

Nodes sit at ``-L + i*h`` for ``i = 0..N-1`` with ``h = 2L/N``, so the origin
is a node.  Derivatives are Fourier-spectral with wavenumbers ``pi*m/L``;
integrals use the midpoint rule, which is spectrally accurate for smooth
fields that decay at the boundary.  Nonlocal operators use a zero-padded
``2N x 2N`` grid so convolutions are linear rather than circular.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DomainTooSmall, GridError, OddN

Multiplier = Callable[[np.ndarray, np.ndarray], np.ndarray]
RealKernel = Callable[[np.ndarray, np.ndarray], np.ndarray]

BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        # first axis is x1, second is x2
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    @cached_property
    def kmesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.k, self.k, indexing="ij")

    @cached_property
    def k2(self) -> np.ndarray:
        k1, k2 = self.kmesh
        return k1 * k1 + k2 * k2

    @cached_property
    def r(self) -> np.ndarray:
        x1, x2 = self.mesh
        return np.hypot(x1, x2)

    @property
    def origin(self) -> tuple[int, int]:
        return self.N // 2, self.N // 2

    def node(self, i: int) -> float:
        return -self.L + i * self.h


@dataclass(frozen=True, eq=False)
class Field2D:
    grid: Grid
    values: np.ndarray
    name: str = field(default="u")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N, self.grid.N):
            raise GridError(f"values shape {v.shape} does not match grid N={self.grid.N}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def like(self, values: np.ndarray, name: Optional[str] = None) -> "Field2D":
        return Field2D(self.grid, values, self.name if name is None else name)

    def __mul__(self, c: float) -> "Field2D":
        return self.like(self.values * c)

    __rmul__ = __mul__


def make_grid(L: float, N: int) -> Grid:
    """Build a ``Grid`` after validating ``L > 0`` and even ``N >= 8``."""
    if not (np.isfinite(L) and L > 0):
        raise GridError(f"L must be positive, got {L}")
    if int(N) != N:
        raise GridError(f"N must be an integer, got {N}")
    N = int(N)
    if N % 2:
        raise OddN(f"N must be even, got {N}")
    if N < 8:
        raise GridError(f"N must be at least 8, got {N}")
    return Grid(float(L), N)


def sample(grid: Grid, func: Callable[[np.ndarray, np.ndarray], np.ndarray], name: str = "u") -> Field2D:
    """Evaluate ``func(x1, x2)`` at the grid nodes."""
    x1, x2 = grid.mesh
    return Field2D(grid, np.broadcast_to(func(x1, x2), x1.shape).astype(float), name)


def integrate(f: Field2D) -> float:
    return float(f.grid.h ** 2 * np.sum(f.values))


def inner(f: Field2D, g: Field2D) -> float:
    return float(f.grid.h ** 2 * np.sum(f.values * g.values))


def lp_norm(f: Field2D, p: float) -> float:
    """Discrete ``|f|_p`` (``p = inf`` gives the max norm)."""
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    return float((f.grid.h ** 2 * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def laplacian(u: Field2D) -> Field2D:
    g = u.grid
    return u.like(np.fft.ifft2(-g.k2 * np.fft.fft2(u.values)).real)


def gradient(u: Field2D) -> tuple[Field2D, Field2D]:
    """Spectral first derivatives; the Nyquist mode is dropped."""
    g = u.grid
    k = g.k.copy()
    k[g.N // 2] = 0.0
    uh = np.fft.fft2(u.values)
    d1 = np.fft.ifft2(1j * k[:, None] * uh).real
    d2 = np.fft.ifft2(1j * k[None, :] * uh).real
    return u.like(d1), u.like(d2)


def grad_norm_sq(u: Field2D) -> float:
    """``int |grad u|^2`` via Parseval on the spectral derivative.

    The field is assumed to decay near the boundary; no check is made here.
    """
    g = u.grid
    uh = np.fft.fft2(u.values)
    return float(g.h ** 2 / g.N ** 2 * np.sum(g.k2 * np.abs(uh) ** 2))


def grad_norm_sq_fd(u: Field2D) -> float:
    """Second-order centered-difference counterpart of :func:`grad_norm_sq`."""
    v, h = u.values, u.grid.h
    d1 = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * h)
    d2 = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * h)
    return float(h ** 2 * np.sum(d1 * d1 + d2 * d2))


# -- free-space convolution -------------------------------------------------

@lru_cache(maxsize=32)
def _padded(L: float, N: int):
    h = 2.0 * L / N
    M = 2 * N
    k = 2.0 * np.pi * np.fft.fftfreq(M, d=h)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    m = np.fft.fftfreq(M) * M
    d = m * h
    d1, d2 = np.meshgrid(d, d, indexing="ij")
    return k1, k2, d1, d2


def transfer_function(
    grid: Grid,
    multiplier: Optional[Multiplier] = None,
    smoothed_kernel: Optional[RealKernel] = None,
    screen: Optional[float] = None,
) -> np.ndarray:
    """Frequency response on the padded grid.

    With only ``multiplier`` this is the continuum symbol sampled at the padded
    wavenumbers (periodic images at distance ``4L`` remain).  When
    ``smoothed_kernel`` is given, the kernel is split Ewald-style with a
    Gaussian of width ``screen``: the smooth long-range part
    ``kernel * phi_screen`` is sampled in real space (exact aperiodic discrete
    convolution) and the singular short-range remainder uses
    ``multiplier(k) * (1 - exp(-|k|^2 screen^2 / 4))``.  With only
    ``smoothed_kernel`` the kernel samples are used as they are (plain
    real-space quadrature).
    """
    k1, k2, d1, d2 = _padded(grid.L, grid.N)
    if multiplier is None:
        T = np.zeros(k1.shape, dtype=complex)
    else:
        T = np.asarray(multiplier(k1, k2), dtype=complex) * np.ones_like(k1)
    if smoothed_kernel is not None:
        if multiplier is not None:
            if screen is None:
                raise ValueError("screen width required to split multiplier and kernel")
            kk = k1 * k1 + k2 * k2
            T = T * -np.expm1(-kk * screen ** 2 / 4.0)
        ker = np.asarray(smoothed_kernel(d1, d2), dtype=float) * np.ones_like(d1)
        # displacement -2L never occurs between two nodes; drop it to keep odd kernels odd
        ker[grid.N, :] = 0.0
        ker[:, grid.N] = 0.0
        T = T + grid.h ** 2 * np.fft.fft2(ker)
    return T


def convolve_transfer(f: np.ndarray, T: np.ndarray, N: int) -> np.ndarray:
    pad = np.zeros((2 * N, 2 * N))
    pad[:N, :N] = f
    return np.fft.ifft2(T * np.fft.fft2(pad)).real[:N, :N]


def convolve_free(
    f: Field2D,
    multiplier: Optional[Multiplier] = None,
    smoothed_kernel: Optional[RealKernel] = None,
    screen: Optional[float] = None,
) -> Field2D:
    """Linear convolution of ``f`` with the kernel whose symbol is ``multiplier``.

    The multiplier's value at ``k = 0`` is used as given; callers set it.
    See :func:`transfer_function` for the optional screened split.
    """
    T = transfer_function(f.grid, multiplier, smoothed_kernel, screen)
    return f.like(convolve_transfer(f.values, T, f.grid.N))


# -- fiber rescaling --------------------------------------------------------

def scale_field(u: Field2D, t: float) -> Field2D:
    """Return ``t * u(t x)`` on the same grid by trigonometric interpolation.

    Points with ``|t x_i| >= L`` fall outside the sampled domain and are set
    to zero (the fields handled here decay there).  The cost is separable,
    ``O(N^3)``.
    """
    g = u.grid
    N = g.N
    uh = np.fft.fft2(u.values)
    uh[N // 2, :] = 0.0
    uh[:, N // 2] = 0.0
    xs = t * g.x
    E = np.exp(1j * np.outer(xs + g.L, g.k)) / N
    inside = np.abs(xs) < g.L
    E[~inside, :] = 0.0
    vals = (E @ uh @ E.T).real
    return u.like(t * vals)


def interpolate(u: Field2D, x1, x2) -> np.ndarray:
    """Trigonometric interpolant of ``u`` at arbitrary points (Nyquist dropped)."""
    g = u.grid
    N = g.N
    uh = np.fft.fft2(u.values)
    uh[N // 2, :] = 0.0
    uh[:, N // 2] = 0.0
    p1 = np.atleast_1d(np.asarray(x1, dtype=float))
    p2 = np.atleast_1d(np.asarray(x2, dtype=float))
    shape = np.broadcast(p1, p2).shape
    p1, p2 = np.broadcast_to(p1, shape).ravel(), np.broadcast_to(p2, shape).ravel()
    E1 = np.exp(1j * np.outer(p1 + g.L, g.k))
    E2 = np.exp(1j * np.outer(p2 + g.L, g.k))
    vals = np.einsum("pk,pk->p", E1 @ uh, E2).real / N ** 2
    return vals.reshape(shape)


def boundary_max(u: Field2D, ring: int = 2) -> float:
    v = np.abs(u.values)
    return float(max(v[:ring].max(), v[-ring:].max(), v[:, :ring].max(), v[:, -ring:].max()))


def check_decay(u: Field2D, tol: float = BOUNDARY_TOL, ring: int = 2) -> None:
    b = boundary_max(u, ring)
    if b > tol:
        raise DomainTooSmall(f"|u| = {b:.3e} on the boundary ring exceeds {tol:.1e}; enlarge L")


# -- field dump format ------------------------------------------------------

def write_field(u: Field2D, path: str | Path, binary: bool = False) -> Path:
    """Write ``<path>.json`` header plus ``<path>.csv`` (or ``.bin``, float64 LE)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"L": u.grid.L, "N": u.grid.N, "name": u.name, "format": "bin" if binary else "csv"}
    path.with_suffix(".json").write_text(json.dumps(header, indent=2))
    if binary:
        data = path.with_suffix(".bin")
        u.values.astype("<f8").tofile(data)
    else:
        data = path.with_suffix(".csv")
        np.savetxt(data, u.values, delimiter=",", fmt="%.17g")
    return data


def read_field(path: str | Path) -> Field2D:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    grid = make_grid(header["L"], header["N"])
    if header.get("format", "csv") == "bin":
        vals = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(grid.N, grid.N)
    else:
        vals = np.loadtxt(path.with_suffix(".csv"), delimiter=",").reshape(grid.N, grid.N)
    return Field2D(grid, vals, header.get("name", "u"))
