"""Nonlinearities ``f``, their primitives ``F`` and derivatives ``f'``.

Every family vanishes on ``(-inf, 0]`` (the paper's standing convention).
Families:

* ``Zero``                       f = 0
* ``PurePower(p)``               f = s^(p-1)
* ``CombinedPower(mu, q, p)``    f = mu s^(q-1) + s^(p-1)
* ``CriticalExp(alpha0, beta, order)``
      F = beta (e^x - sum_{k<m} x^k/k!),  x = alpha0 s^2, m = order >= 3,
      so F e^{-alpha0 s^2} -> beta (hypothesis (f5) with beta0 = beta) and
      theta F <= f s holds for every theta <= 2m.
* ``Supercritical(alpha_bar0, tau, xi, p, gamma, delta, M)``
      f = h(s) e^{alpha_bar0 s^tau} with h(s) = xi s^(p-1), optionally
      truncated above ``R`` per Eq. (fR).

All evaluators accept scalars or arrays and are vectorized.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gammainc, hyp1f1

from .errors import NotSupercritical, Overflow

EXP_CAP = 700.0


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class PurePower:
    p: float


@dataclass(frozen=True)
class CombinedPower:
    mu: float
    q: float
    p: float


@dataclass(frozen=True)
class CriticalExp:
    alpha0: float
    beta: float = 1.0
    order: int = 3


@dataclass(frozen=True)
class Supercritical:
    alpha_bar0: float
    tau: float
    xi: float
    p: float
    gamma: float
    delta: float
    M: float


Family = Union[Zero, PurePower, CombinedPower, CriticalExp, Supercritical]
FAMILIES = {cls.__name__: cls for cls in (Zero, PurePower, CombinedPower, CriticalExp, Supercritical)}


class TruncationMode(str, Enum):
    SUBCRITICAL_DELTA = "subcritical_delta"
    CRITICAL_TWO = "critical_two"


@dataclass(frozen=True)
class Truncation:
    R: float
    delta_bar: float
    mode: TruncationMode


def _default_theta(family: Family) -> float:
    if isinstance(family, PurePower):
        return float(family.p)
    if isinstance(family, CombinedPower):
        return float(min(family.q, family.p))
    return 4.5


@dataclass(frozen=True)
class NonlinearitySpec:
    family: Family
    theta: Optional[float] = None
    chi: float = 4.0
    truncation: Optional[Truncation] = None
    exp_cap: float = EXP_CAP

    def __post_init__(self):
        if self.theta is None:
            object.__setattr__(self, "theta", _default_theta(self.family))
        fam = self.family
        if isinstance(fam, (PurePower, CombinedPower)) and fam.p <= 2:
            raise ValueError("power exponent must exceed 2")
        if isinstance(fam, CriticalExp) and (fam.order < 3 or fam.alpha0 <= 0 or fam.beta <= 0):
            raise ValueError("CriticalExp needs alpha0 > 0, beta > 0, order >= 3")
        if isinstance(fam, Supercritical) and (fam.alpha_bar0 <= 0 or fam.tau < 2 or fam.p <= 1):
            raise ValueError("Supercritical needs alpha_bar0 > 0, tau >= 2, p > 1")

    # -- growth classification ------------------------------------------------
    @property
    def growth_class(self) -> str:
        fam = self.family
        if isinstance(fam, (Zero, PurePower, CombinedPower)):
            return "polynomial"
        if isinstance(fam, CriticalExp):
            return "critical"
        if self.truncation is None:
            return "supercritical" if fam.tau > 2 else "critical"
        return "subcritical" if self.truncation.delta_bar < 2 else "critical"

    @property
    def critical_alpha(self) -> Optional[float]:
        """Exponent ``alpha_0`` of the critical class (Eq. (2growth3) for truncations)."""
        fam = self.family
        if isinstance(fam, CriticalExp):
            return fam.alpha0
        if isinstance(fam, Supercritical) and self.truncation is not None and self.truncation.delta_bar == 2:
            return fam.gamma + fam.alpha_bar0 * self.truncation.R ** (fam.delta - 2)
        return None

    @property
    def is_zero(self) -> bool:
        return isinstance(self.family, Zero)

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        trunc = None
        if self.truncation is not None:
            t = self.truncation
            trunc = {"R": t.R, "delta_bar": t.delta_bar, "mode": t.mode.value}
        return {
            "family": type(self.family).__name__,
            "params": asdict(self.family),
            "theta": self.theta,
            "chi": self.chi,
            "truncation": trunc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "NonlinearitySpec":
        name = d["family"]
        if name not in FAMILIES:
            raise ValueError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
        family = FAMILIES[name](**(d.get("params") or {}))
        trunc = d.get("truncation")
        if trunc is not None:
            trunc = Truncation(float(trunc["R"]), float(trunc["delta_bar"]), TruncationMode(trunc["mode"]))
        kw = {}
        if d.get("chi") is not None:
            kw["chi"] = float(d["chi"])
        if d.get("exp_cap") is not None:
            kw["exp_cap"] = float(d["exp_cap"])
        return cls(family, d.get("theta"), truncation=trunc, **kw)

    @classmethod
    def from_json(cls, text: str) -> "NonlinearitySpec":
        return cls.from_dict(json.loads(text))


def pure_power(p: float, theta: Optional[float] = None) -> NonlinearitySpec:
    return NonlinearitySpec(PurePower(p), theta)


ZERO = NonlinearitySpec(Zero())


# -- evaluation -------------------------------------------------------------

def _guard(arg: np.ndarray, cap: float) -> np.ndarray:
    if arg.size and np.max(arg) > cap:
        raise Overflow(f"exponent argument {np.max(arg):.4g} exceeds cap {cap:g}")
    return arg


def _as_array(s):
    arr = np.asarray(s, dtype=float)
    return arr, arr.ndim == 0


def _ret(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def _super_exponent(fam: Supercritical, trunc: Optional[Truncation], s: np.ndarray) -> np.ndarray:
    """Exponent of Eq. (fR): ``alpha_bar0 s^tau`` below R, ``alpha_bar0 R^(tau-db) s^db`` above."""
    if trunc is None:
        return fam.alpha_bar0 * s ** fam.tau
    R, db = trunc.R, trunc.delta_bar
    low = fam.alpha_bar0 * np.minimum(s, R) ** fam.tau
    high = fam.alpha_bar0 * R ** (fam.tau - db) * s ** db
    return np.where(s <= R, low, high)


def _super_f(spec: NonlinearitySpec, s: np.ndarray) -> np.ndarray:
    fam = spec.family
    arg = _guard(_super_exponent(fam, spec.truncation, s), spec.exp_cap)
    return fam.xi * s ** (fam.p - 1) * np.exp(arg)


_GL_NODES = 32


@lru_cache(maxsize=4)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _gl_integral(spec: NonlinearitySpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``int_a^b f`` elementwise, composite Gauss-Legendre.

    Panel count grows with the exponent size so the integrand stays well
    resolved; integrands are smooth on each branch of Eq. (fR).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        return np.zeros(a.shape)
    xg, wg = _gauss_legendre(_GL_NODES)
    top = float(np.max(_super_exponent(spec.family, spec.truncation, np.maximum(b, 0.0)))) if b.size else 0.0
    panels = 2 + int(top / 8.0)
    width = (b - a) / panels
    out = np.zeros(a.shape)
    for k in range(panels):
        lo = a + k * width
        pts = lo[..., None] + width[..., None] * xg
        out += width * np.sum(wg * _super_f(spec, pts), axis=-1)
    return out


def _exp_power_integral(xi: float, p: float, c: float, k: float, s: np.ndarray) -> np.ndarray:
    """``int_0^s xi t^(p-1) e^(c t^k) dt`` in closed form.

    With ``x = c t^k`` the integral is ``xi / (k c^(p/k)) int_0^X x^(a-1) e^x dx``
    for ``a = p/k``, and ``int_0^X x^(a-1) e^x dx = X^a 1F1(a; a+1; X) / a``.
    """
    a = p / k
    X = c * s ** k
    return xi / (k * c ** a) * X ** a / a * hyp1f1(a, a + 1.0, X)


def _super_F(spec: NonlinearitySpec, s: np.ndarray) -> np.ndarray:
    fam, trunc = spec.family, spec.truncation
    _guard(_super_exponent(fam, trunc, s), spec.exp_cap)
    if fam.alpha_bar0 == 0:
        return fam.xi * s ** fam.p / fam.p
    if trunc is None:
        return _exp_power_integral(fam.xi, fam.p, fam.alpha_bar0, fam.tau, s)
    R, db = trunc.R, trunc.delta_bar
    out = _exp_power_integral(fam.xi, fam.p, fam.alpha_bar0, fam.tau, np.minimum(s, R))
    high = s > R
    if np.any(high):
        c = fam.alpha_bar0 * R ** (fam.tau - db)
        tail = _exp_power_integral(fam.xi, fam.p, c, db, s[high]) - _exp_power_integral(fam.xi, fam.p, c, db, R)
        out[high] += tail
    return out


def _super_F_quadrature(spec: NonlinearitySpec, s: np.ndarray) -> np.ndarray:
    """Composite Gauss-Legendre reference for :func:`_super_F`."""
    trunc = spec.truncation
    out = np.zeros(s.shape)
    if trunc is None:
        out[...] = _gl_integral(spec, np.zeros(s.shape), s)
        return out
    R = trunc.R
    low = s <= R
    out[low] = _gl_integral(spec, np.zeros(int(low.sum())), s[low])
    if np.any(~low):
        FR = float(_gl_integral(spec, np.zeros(1), np.array([R]))[0])
        out[~low] = FR + _gl_integral(spec, np.full(int((~low).sum()), R), s[~low])
    return out


def _super_fprime(spec: NonlinearitySpec, s: np.ndarray) -> np.ndarray:
    fam, trunc = spec.family, spec.truncation
    f = _super_f(spec, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        hlog = (fam.p - 1) / s
        if trunc is None:
            elog = fam.alpha_bar0 * fam.tau * s ** (fam.tau - 1)
        else:
            R, db = trunc.R, trunc.delta_bar
            # right-sided branch at the knot s = R
            elog = np.where(
                s < R,
                fam.alpha_bar0 * fam.tau * s ** (fam.tau - 1),
                fam.alpha_bar0 * R ** (fam.tau - db) * db * s ** (db - 1),
            )
        return f * (hlog + elog)


def _exp_tail(x: np.ndarray, m: int) -> np.ndarray:
    """``e^x - sum_{k<m} x^k/k!`` without cancellation (``e^x P(m, x)``)."""
    return np.exp(x) * gammainc(m, x)


def eval_f(spec: NonlinearitySpec, s):
    arr, scalar = _as_array(s)
    out = np.zeros(arr.shape)
    pos = arr > 0
    sp = arr[pos]
    fam = spec.family
    if isinstance(fam, Zero):
        pass
    elif isinstance(fam, PurePower):
        out[pos] = sp ** (fam.p - 1)
    elif isinstance(fam, CombinedPower):
        out[pos] = fam.mu * sp ** (fam.q - 1) + sp ** (fam.p - 1)
    elif isinstance(fam, CriticalExp):
        x = _guard(fam.alpha0 * sp * sp, spec.exp_cap)
        out[pos] = 2 * fam.beta * fam.alpha0 * sp * _exp_tail(x, fam.order - 1)
    else:
        out[pos] = _super_f(spec, sp)
    return _ret(out, scalar)


def eval_F(spec: NonlinearitySpec, s):
    arr, scalar = _as_array(s)
    out = np.zeros(arr.shape)
    pos = arr > 0
    sp = arr[pos]
    fam = spec.family
    if isinstance(fam, Zero):
        pass
    elif isinstance(fam, PurePower):
        out[pos] = sp ** fam.p / fam.p
    elif isinstance(fam, CombinedPower):
        out[pos] = fam.mu * sp ** fam.q / fam.q + sp ** fam.p / fam.p
    elif isinstance(fam, CriticalExp):
        x = _guard(fam.alpha0 * sp * sp, spec.exp_cap)
        out[pos] = fam.beta * _exp_tail(x, fam.order)
    else:
        out[pos] = _super_F(spec, sp)
    return _ret(out, scalar)


def eval_fprime(spec: NonlinearitySpec, s):
    arr, scalar = _as_array(s)
    out = np.zeros(arr.shape)
    pos = arr > 0
    sp = arr[pos]
    fam = spec.family
    if isinstance(fam, Zero):
        pass
    elif isinstance(fam, PurePower):
        out[pos] = (fam.p - 1) * sp ** (fam.p - 2)
    elif isinstance(fam, CombinedPower):
        out[pos] = fam.mu * (fam.q - 1) * sp ** (fam.q - 2) + (fam.p - 1) * sp ** (fam.p - 2)
    elif isinstance(fam, CriticalExp):
        x = _guard(fam.alpha0 * sp * sp, spec.exp_cap)
        m = fam.order
        out[pos] = 2 * fam.beta * fam.alpha0 * (_exp_tail(x, m - 1) + 2 * x * _exp_tail(x, m - 2))
    else:
        out[pos] = _super_fprime(spec, sp)
    return _ret(out, scalar)


def eval_h(spec: NonlinearitySpec, s):
    """The prefactor ``h`` of Eq. (form) for supercritical specs."""
    fam = spec.family
    if not isinstance(fam, Supercritical):
        raise NotSupercritical("h is defined only for Supercritical specs")
    arr, scalar = _as_array(s)
    out = np.where(arr > 0, fam.xi * np.maximum(arr, 0.0) ** (fam.p - 1), 0.0)
    return _ret(out, scalar)


def untruncated(spec: NonlinearitySpec) -> NonlinearitySpec:
    return replace(spec, truncation=None)


def truncate(spec: NonlinearitySpec, R: float, mode: TruncationMode | str) -> NonlinearitySpec:
    """Return ``f^{R, delta_bar}`` of Eq. (fR) with ``delta_bar = delta`` or ``2``."""
    fam = spec.family
    if not isinstance(fam, Supercritical):
        raise NotSupercritical(f"cannot truncate a {type(fam).__name__} spec")
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    mode = TruncationMode(mode)
    db = fam.delta if mode is TruncationMode.SUBCRITICAL_DELTA else 2.0
    return replace(spec, truncation=Truncation(float(R), float(db), mode))


# -- hypothesis checks -------------------------------------------------------

@dataclass
class ARReport:
    holds: bool
    worst_ratio: float
    worst_s: float


def check_ar(spec: NonlinearitySpec, samples: Sequence[float], rtol: float = 1e-12) -> ARReport:
    """Check ``theta F(s) <= f(s) s`` and ``F(s) > 0`` for positive samples.

    This is the direction of (f2) and of the proof of Lemma 5.1 (the lemma's
    statement has the inequality typeset the other way round).
    """
    s = np.asarray([v for v in samples if v > 0], dtype=float)
    if s.size == 0:
        return ARReport(True, 0.0, float("nan"))
    F = eval_F(spec, s)
    fs = eval_f(spec, s) * s
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(fs > 0, spec.theta * F / fs, np.inf)
    i = int(np.argmax(ratio))
    holds = bool(np.all(F > 0) and np.all(ratio <= 1 + rtol))
    return ARReport(holds, float(ratio[i]), float(s[i]))


@dataclass
class MonotoneReport:
    holds: bool
    violations: list = field(default_factory=list)


def fbar(spec: NonlinearitySpec, s):
    return eval_f(spec, s) * np.asarray(s) - 2 * eval_F(spec, s)


def check_fbar_monotone(spec: NonlinearitySpec, samples: Sequence[float], rtol: float = 1e-12) -> MonotoneReport:
    """Check ``Fbar(s)/s^4`` strictly increasing on increasing positive samples."""
    s = np.asarray(samples, dtype=float)
    if np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise ValueError("samples must be positive and strictly increasing")
    g = fbar(spec, s) / s ** 4
    viol = []
    for i in range(len(s) - 1):
        if not g[i + 1] - g[i] > rtol * max(abs(g[i]), abs(g[i + 1])):
            viol.append((float(s[i]), float(s[i + 1])))
    return MonotoneReport(not viol, viol)


def superquadratic_combo(spec: NonlinearitySpec, s):
    """Lemma A.3: ``f'(s) s^2 - 5 f(s) s + 8 F(s)``."""
    s = np.asarray(s, dtype=float)
    out = eval_fprime(spec, s) * s * s - 5 * eval_f(spec, s) * s + 8 * eval_F(spec, s)
    return float(out) if out.ndim == 0 else out


@dataclass
class EnvelopeReport:
    holds: bool
    C_eps: float


def growth_envelope_check(
    spec: NonlinearitySpec, eps: float, alpha: float, q: float, samples: Sequence[float]
) -> EnvelopeReport:
    """Smallest ``C`` with ``|f| <= eps s^(chi-1) + C s^(q-1) (e^(alpha s^2) - 1)`` on samples.

    A supremum attained at the largest sample means the required constant is
    still growing there; that is reported as ``holds=False``.
    """
    if q <= 2:
        raise ValueError("q must exceed 2")
    s = np.sort(np.asarray([v for v in samples if v > 0], dtype=float))
    excess = np.abs(eval_f(spec, s)) - eps * s ** (spec.chi - 1)
    ratio = np.maximum(excess, 0.0) / (s ** (q - 1) * np.expm1(alpha * s * s))
    if not np.all(np.isfinite(ratio)):
        return EnvelopeReport(False, float("inf"))
    C = float(np.max(ratio)) if ratio.size else 0.0
    if C == 0.0:
        return EnvelopeReport(True, 0.0)
    growing = int(np.argmax(ratio)) == len(s) - 1
    return EnvelopeReport(not growing, C)


def check_h4(spec: NonlinearitySpec, samples: Sequence[float]) -> bool:
    """(h4): ``|h(t)| <= M e^{gamma |t|^delta}`` on samples."""
    fam = spec.family
    if not isinstance(fam, Supercritical):
        raise NotSupercritical("(h4) applies to Supercritical specs")
    t = np.abs(np.asarray(samples, dtype=float))
    return bool(np.all(np.abs(eval_h(spec, t)) <= fam.M * np.exp(fam.gamma * t ** fam.delta)))


def check_h1(spec: NonlinearitySpec, s_small: float = 1e-3) -> bool:
    """(h1)/(f1): ``f(s)/s^(chi-1) -> 0``; tested as decrease over two small scales."""
    s = np.array([s_small, s_small / 10])
    r = eval_f(spec, s) / s ** (spec.chi - 1)
    return bool(r[1] < r[0] or r[0] == 0.0)


@dataclass
class F4F5Report:
    f4_holds: bool
    f4_worst: float
    f5_liminf_estimate: float
    f5_holds: bool


def check_f4_f5(
    spec: NonlinearitySpec,
    s0: float,
    M0: float,
    vartheta: float,
    beta0: float,
    samples: Sequence[float],
) -> F4F5Report:
    """Sampling diagnostics for (f4) ``s^vartheta F <= M0 f`` (s >= s0) and
    (f5) ``liminf F e^{-alpha0 s^2} >= beta0`` (tail of the samples)."""
    alpha0 = spec.critical_alpha
    if alpha0 is None:
        raise ValueError("(f5) needs a critical-growth spec")
    s = np.sort(np.asarray([v for v in samples if v >= s0], dtype=float))
    F = eval_F(spec, s)
    f = eval_f(spec, s)
    worst = float(np.max(s ** vartheta * F / (M0 * f))) if s.size else 0.0
    est = float(F[-1] * np.exp(-alpha0 * s[-1] ** 2)) if s.size else float("nan")
    return F4F5Report(worst <= 1.0, worst, est, bool(est >= beta0 * (1 - 1e-6)))


def c_star(alpha0: float) -> float:
    """Compactness threshold ``2 pi / alpha0`` of Lemma 4.2."""
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    return 2.0 * math.pi / alpha0
