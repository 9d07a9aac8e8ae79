"""Quadrature helpers: composite Gauss-Legendre panels, alternating-series
acceleration and zero sequences of oscillatory kernels.

The radial Fourier transforms in this package have integrands of the form
(trig or Bessel kernel) * (slowly decaying envelope).  Naive truncation is
hopeless when the envelope decays like a power of log, so every oscillatory
integral here is summed panel-by-panel between consecutive kernel zeros and
the alternating tail is accelerated with the Cohen-Villegas-Zagier scheme.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import jn_zeros

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes not in _GL_CACHE:
        _GL_CACHE[nodes] = leggauss(nodes)
    return _GL_CACHE[nodes]


def panel_integrals(f, edges: np.ndarray, nodes: int = 16) -> np.ndarray:
    """Gauss-Legendre integral of f over each panel [edges[i], edges[i+1]].

    f must be vectorized; all panels are evaluated in one call.
    """
    x, w = _gl(nodes)
    a = edges[:-1]
    b = edges[1:]
    half = 0.5 * (b - a)
    pts = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ w)


def alternating_sum(terms: np.ndarray) -> float:
    """Sum_{k>=0} (-1)^k a_k for nonnegative, smoothly varying a_k (CVZ).

    Converges geometrically (about 5.83^-n) even when a_k decays only
    logarithmically, which is exactly the regime of log-type exponents.
    """
    a = np.asarray(terms, dtype=float)
    n = len(a)
    if n == 0:
        return 0.0
    if n > 400:  # (3+sqrt 8)^n overflows long before this
        a = a[:400]
        n = 400
    d = (3.0 + math.sqrt(8.0)) ** n
    d = (d + 1.0 / d) / 2.0
    b = -1.0
    c = -d
    s = 0.0
    for k in range(n):
        c = b - c
        s += c * a[k]
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return s / d


class ZeroSequence:
    """Increasing positive zeros of an oscillatory kernel u -> kernel(omega*u)."""

    def __init__(self, kind: str, omega: float):
        if omega <= 0.0:
            raise ValueError("omega must be positive")
        self.kind = kind
        self.omega = omega
        if kind == "bessel0":
            self._j0 = jn_zeros(0, 64)

    def __call__(self, k0: int, count: int) -> np.ndarray:
        """Zeros number k0 .. k0+count-1 (0-based)."""
        k = np.arange(k0, k0 + count, dtype=float)
        if self.kind == "cos":
            return (k + 0.5) * math.pi / self.omega
        if self.kind == "sin":
            return (k + 1.0) * math.pi / self.omega
        if self.kind == "bessel0":
            hi = k0 + count
            if hi > len(self._j0):
                self._j0 = jn_zeros(0, max(hi, 2 * len(self._j0)))
            return self._j0[k0:k0 + count] / self.omega
        raise ValueError(f"unknown kernel kind {self.kind!r}")


def oscillatory_sum(f, zeros: ZeroSequence, *, nodes: int = 16,
                    direct: int = 24, accel: int = 40, rtol: float = 1e-12,
                    max_direct_blocks: int = 400,
                    stop_when=None) -> tuple[float, float]:
    """Integrate f over [first zero, infinity), f changing sign at each zero.

    Returns (value, error estimate).  Panels are summed directly while they
    still shrink quickly (or until stop_when(u) says the envelope died);
    the remaining alternating tail goes through alternating_sum.
    """
    total = 0.0
    abs_acc = 0.0
    k = 0
    tiny_run = 0
    for _ in range(max_direct_blocks):
        edges = zeros(k, direct + 1)
        vals = panel_integrals(f, edges, nodes)
        for v in vals:
            total += v
            abs_acc += abs(v)
        k += direct
        tail_size = abs(vals[-1])
        if tail_size <= rtol * max(abs(total), 1e-300):
            tiny_run += 1
        else:
            tiny_run = 0
        if tiny_run >= 2:
            return total, rtol * abs_acc + tail_size
        if stop_when is not None and stop_when(edges[-1]):
            return total, rtol * abs_acc + tail_size
        # once consecutive panels alternate cleanly and shrink slowly,
        # switch to acceleration
        if len(vals) >= 4 and np.all(vals[:-1] * vals[1:] < 0.0):
            decay = abs(vals[-1] / vals[-3]) if vals[-3] != 0.0 else 0.0
            if decay > 0.2:
                break
    else:
        raise QuadratureError("oscillatory integral: panel budget exhausted",
                              partial=total)

    edges = zeros(k, accel + 1)
    vals = panel_integrals(f, edges, nodes)
    if not np.all(vals[:-1] * vals[1:] < 0.0):
        # alternation broke (envelope hit noise floor): direct sum is enough
        tail = float(np.sum(vals))
        return total + tail, rtol * abs_acc + abs(vals[-1])
    sign = 1.0 if vals[0] > 0 else -1.0
    mags = np.abs(vals)
    t_full = alternating_sum(mags)
    t_less = alternating_sum(mags[:-6])
    tail = sign * t_full
    err = abs(t_full - t_less) + rtol * abs_acc
    return total + tail, err


class QuadratureError(RuntimeError):
    """Raised when an integral fails to converge; carries the partial sum."""

    def __init__(self, message: str, partial: float = math.nan):
        super().__init__(message)
        self.partial = partial


def head_edges(a: float, b: float, per_decade: int = 6,
               linear_span: float = 4.0) -> np.ndarray:
    """Panel edges for a smooth (non-oscillatory) integral over [a, b].

    Linear panels near a, geometric panels once the range spans decades.
    """
    if b <= a:
        return np.array([a, b])
    lin_hi = min(b, a + linear_span)
    n_lin = max(4, int(math.ceil((lin_hi - a) / max(linear_span / 8.0, 1e-12))))
    edges = list(np.linspace(a, lin_hi, n_lin + 1))
    if b > lin_hi:
        lo = max(lin_hi, 1e-300)
        n_geo = max(2, int(math.ceil(per_decade * math.log10(b / lo))))
        n_geo = min(n_geo, 20000)
        edges.extend(np.geomspace(lo, b, n_geo + 1)[1:])
    return np.asarray(edges)


def quad(f, a: float, b: float, *, epsabs: float = 1e-12,
         epsrel: float = 1e-10, limit: int = 400) -> tuple[float, float]:
    """scipy.integrate.quad with package-default tolerances.

    Roundoff chatter from QUADPACK is silenced; the returned error
    estimate is what callers should inspect.
    """
    import warnings

    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", category=integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel,
                                  limit=limit)
    return val, err


def quad_log(f, a: float, b: float, *, epsabs: float = 1e-12,
             epsrel: float = 1e-10) -> tuple[float, float]:
    """Integrate f over (a, b) with the substitution s = e^v.

    Resolves endpoint behavior at 0 (a = 0 maps to v = -inf) and stretches
    slowly decaying tails (b = inf maps to v = +inf).
    """
    lo = -np.inf if a == 0.0 else math.log(a)
    hi = np.inf if math.isinf(b) else math.log(b)

    def g(v: float) -> float:
        # s f(s) of any convergent integral is negligible outside float range
        if abs(v) > 700.0:
            return 0.0
        s = math.exp(v)
        return s * f(s)

    return quad(g, lo, hi, epsabs=epsabs, epsrel=epsrel)
