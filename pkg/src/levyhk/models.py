"""Concrete isotropic unimodal Levy process families.

Each model carries a radial jump density nu, a radial characteristic
exponent psi, the weight ell with its scaling indices, fitted comparison
constants and condition flags, and (where exact increments are available)
a subordinate-Brownian sampler descriptor.

Families:

  stable             psi(u) = u^alpha, exact power-law density.  Serves as
                     a Fourier / Monte Carlo oracle for any alpha in (0,2);
                     only alpha < 1 has weight indices below 1.
  geometric stable   psi(u) = log(1 + u^alpha).  The d = 1, alpha = 1
                     density has a closed form through the sine and cosine
                     integrals; other cases integrate the subordinator
                     density (a Mittag-Leffler profile) against the
                     Gaussian kernel.
  iterated g.s.      psi(u) = log(1 + log(1 + u^alpha)); density recovered
                     by oscillatory inversion of psi' (d = 1 only).
  log-weight family  synthetic density r^-d * w(1/r) with
                     w(s) = log(e+s)^p * (s/(1+s))^beta, exact by
                     construction; psi comes from quadrature.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import erfc, gammaln, j0, sici

from .quadrature import (ZeroSequence, head_edges, oscillatory_sum,
                         panel_integrals, quad, quad_log)
from .scalekit import ScaleKit, ScalingCheckResult, WeightFunction

__all__ = [
    "LevyModel", "SamplerDescriptor", "ConditionFlags",
    "make_stable", "make_geometric_stable",
    "make_iterated_geometric_stable", "make_logp_model",
    "psi_from_nu", "check_condition_B", "classify_ondiag",
    "default_catalog", "get_model", "getoor_mean_exit",
    "softlog",
]


def softlog(r):
    """log(e + r), the slowly varying yardstick used by the log family."""
    return np.log(np.e + np.asarray(r, dtype=float))


# ---------------------------------------------------------------------------
# special functions


def mittag_leffler_neg(beta: float, x: float) -> float:
    """E_beta(-x) for 0 < beta < 1, x >= 0, via the spectral representation

        E_beta(-t^beta) = sin(beta*pi)/pi *
                          int_0^inf u^{beta-1} e^{-t u}
                            / (u^{2 beta} + 2 u^beta cos(beta*pi) + 1) du

    evaluated at t = x^{1/beta}.  Completely monotone and well conditioned
    for every x.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must be in (0,1)")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    t = x ** (1.0 / beta)
    cb = math.cos(beta * math.pi)
    sb = math.sin(beta * math.pi)

    def f(u: float) -> float:
        tu = t * u
        if tu > 700.0:
            return 0.0
        ub = u ** beta
        return u ** (beta - 1.0) * math.exp(-tu) / (ub * ub + 2.0 * cb * ub + 1.0)

    val, _ = quad_log(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-11)
    return sb / math.pi * val


def stable_density_constant(d: int, alpha: float) -> float:
    """A(d, alpha) with nu(r) = A r^{-d-alpha} giving exactly psi(u) = u^alpha."""
    return (alpha * 2.0 ** (alpha - 1.0)
            * math.exp(gammaln((d + alpha) / 2.0) - gammaln(1.0 - alpha / 2.0))
            / math.pi ** (d / 2.0))


def getoor_mean_exit(d: int, alpha: float, radius: float,
                     start_norm: float = 0.0) -> float:
    """Expected exit time of an isotropic alpha-stable process from a ball.

    E_x[tau_B(0,R)] = C(d,alpha) (R^2 - |x|^2)^{alpha/2} with
    C = Gamma(d/2) / (2^alpha Gamma(1+alpha/2) Gamma((d+alpha)/2)).
    """
    if start_norm >= radius:
        return 0.0
    c = math.exp(gammaln(d / 2.0) - gammaln(1.0 + alpha / 2.0)
                 - gammaln((d + alpha) / 2.0)) / 2.0 ** alpha
    return c * (radius * radius - start_norm * start_norm) ** (alpha / 2.0)


def _trig_tail_aux(x: np.ndarray) -> np.ndarray:
    """g(x) = Ci(x) sin(x) + (pi/2 - Si(x)) cos(x) = int_0^inf e^{-xt}/(1+t^2) dt."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e6
    if np.any(small):
        si, ci = sici(x[small])
        out[small] = ci * np.sin(x[small]) + (0.5 * math.pi - si) * np.cos(x[small])
    if np.any(~small):
        z = x[~small]
        # asymptotic sum_k (-1)^k (2k)!/x^{2k+1}
        out[~small] = (1.0 / z) * (1.0 - 2.0 / z**2 + 24.0 / z**4)
    return out


# ---------------------------------------------------------------------------
# sampler descriptors


@dataclass(frozen=True)
class SubordinatorStage:
    """One stage of a subordinator chain.

    kind "gamma": unit-rate gamma subordinator, Laplace exponent log(1+x).
    kind "stable": one-sided beta-stable subordinator, exponent x^beta.
    """

    kind: str
    beta: float = 0.0

    def laplace(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "gamma":
            return np.log1p(lam)
        if self.kind == "stable":
            return lam ** self.beta
        raise ValueError(f"unknown stage kind {self.kind!r}")


@dataclass(frozen=True)
class SamplerDescriptor:
    """Subordinate-Brownian sampler: Brownian motion with generator equal to
    the full Laplacian, run at the subordinator obtained by composing the
    stages in order (first stage outermost in time).
    """

    stages: tuple[SubordinatorStage, ...]

    def laplace(self, lam):
        out = np.asarray(lam, dtype=float)
        for stage in reversed(self.stages):
            out = stage.laplace(out)
        return out

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        return self.laplace(u * u)


# ---------------------------------------------------------------------------
# condition flags


@dataclass(frozen=True)
class ConditionFlags:
    """Machine-checkable condition set of a model.

    S1 marks bounded weights, S2 unbounded almost increasing ones, L1
    weights with running infimum 0, L2 weights pinched between positive
    bounds at infinity.  ondiag classifies finiteness of the density at
    the origin: 'finite', 'divergent', or 'window' (finite only for large
    times).
    """

    B: bool
    C: bool
    D: bool
    S1: bool
    S2: bool
    L1: bool
    L2: bool
    ondiag: str
    in_scope_for_A: bool = True


# ---------------------------------------------------------------------------
# the model class


class LevyModel:
    """Immutable description of one isotropic unimodal Levy process."""

    def __init__(self, name: str, d: int, *, family: str, params: dict,
                 weight: WeightFunction, nu, psi=None, sampler=None,
                 exact_density=None, self_similar_alpha=None):
        if d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        self.name = name
        self.d = d
        self.family = family
        self.params = dict(params)
        self.weight = weight
        self._nu = nu
        self._psi_closed = psi
        self.sampler = sampler
        self.exact_density = exact_density
        self.self_similar_alpha = self_similar_alpha
        self.flags = self._derive_flags()
        self._lock = threading.Lock()
        self._kit: ScaleKit | None = None
        self._psi_table = None
        self._psi_memo: dict[float, float] = {}
        self._kappa: tuple[float, float] | None = None
        self._asym_constants: tuple[float, float] | None = None

    # -- flags ----------------------------------------------------------

    def _derive_flags(self) -> ConditionFlags:
        fam = self.family
        p = self.params.get("p")
        if fam == "stable":
            alpha = self.params["alpha"]
            return ConditionFlags(B=True, C=True, D=True, S1=False, S2=True,
                                  L1=False, L2=False, ondiag="finite",
                                  in_scope_for_A=alpha < 1.0)
        if fam == "geometric-stable":
            return ConditionFlags(B=True, C=True, D=True, S1=True, S2=False,
                                  L1=False, L2=True, ondiag="window")
        if fam == "iterated-geometric-stable":
            return ConditionFlags(B=True, C=True, D=True, S1=True, S2=False,
                                  L1=True, L2=False, ondiag="divergent")
        if fam == "log-weight":
            if p > 0:
                return ConditionFlags(B=True, C=True, D=True, S1=False,
                                      S2=True, L1=False, L2=False,
                                      ondiag="finite")
            if p == 0:
                return ConditionFlags(B=True, C=True, D=True, S1=True,
                                      S2=False, L1=False, L2=True,
                                      ondiag="window")
            return ConditionFlags(B=True, C=True, D=True, S1=True, S2=False,
                                  L1=True, L2=False, ondiag="divergent")
        raise ValueError(f"unknown family {fam!r}")

    # -- evaluations ------------------------------------------------------

    def nu(self, r):
        """Radial jump density at radius r (vectorized)."""
        return self._nu(np.asarray(r, dtype=float))

    def psi(self, u):
        """Radial characteristic exponent (vectorized).

        Closed form where available, otherwise a monotone log-log
        interpolant of the quadrature values on a lazily built grid.
        """
        u = np.asarray(u, dtype=float)
        if self._psi_closed is not None:
            return self._psi_closed(u)
        return self._psi_interp(u)

    def psi_quadrature(self, u: float) -> float:
        """psi by direct radial quadrature of nu (the slow exact route)."""
        return psi_from_nu(self, u)

    def _psi_interp(self, u):
        table = self._psi_table
        if table is None:
            with self._lock:
                table = self._psi_table
                if table is None:
                    table = _PsiTable(self)
                    self._psi_table = table
        return table(u)

    @property
    def kit(self) -> ScaleKit:
        """Scale-function calculus of this model's weight (shared, cached)."""
        if self._kit is None:
            with self._lock:
                if self._kit is None:
                    self._kit = ScaleKit(self.weight)
        return self._kit

    # -- fitted comparison constants --------------------------------------

    def kappa_bounds(self, r_lo: float = 1e-6, r_hi: float = 1e3,
                     points_per_decade: int = 32) -> tuple[float, float]:
        """Fitted (kappa1, kappa2) with kappa1 <= nu(r) r^d / ell(1/r) <= kappa2."""
        if self._kappa is None:
            r = np.geomspace(r_lo, r_hi, int(points_per_decade
                                             * math.log10(r_hi / r_lo)) + 1)
            ratio = self.nu(r) * r ** self.d / self.weight(1.0 / r)
            self._kappa = (float(np.min(ratio)), float(np.max(ratio)))
        return self._kappa

    def exponent_scale_constants(self, r_lo: float = 1e-4, r_hi: float = 1e2,
                                 points: int = 97) -> tuple[float, float]:
        """Fitted (C0, C1) with C0 h(r) <= psi(1/r) <= C1 h(r) on the grid."""
        if self._asym_constants is None:
            r = np.geomspace(r_lo, r_hi, points)
            ratio = np.array([float(self.psi(1.0 / x)) / self.kit.h(x)
                              for x in r])
            self._asym_constants = (float(np.min(ratio)), float(np.max(ratio)))
        return self._asym_constants

    def __repr__(self):
        return f"LevyModel({self.name!r}, d={self.d})"


class _PsiTable:
    """Monotone log-log interpolant of psi_from_nu on a wide grid.

    Power-law continuation below the grid (the density tail is an exact
    power there); direct quadrature fallback above it.
    """

    U_LO, U_HI, PER_DECADE = 1e-10, 1e46, 10

    def __init__(self, model: LevyModel):
        self._model = model
        n = int(self.PER_DECADE * math.log10(self.U_HI / self.U_LO)) + 1
        grid = np.geomspace(self.U_LO, self.U_HI, n)
        vals = np.array([psi_from_nu(model, u) for u in grid])
        if np.any(vals <= 0.0):
            raise RuntimeError("psi quadrature produced nonpositive values")
        self._lg_lo = math.log(self.U_LO)
        self._lg_hi = math.log(self.U_HI)
        self._interp = PchipInterpolator(np.log(grid), np.log(vals),
                                         extrapolate=False)
        # low-end slope for power continuation
        self._slope_lo = (math.log(vals[1]) - math.log(vals[0])) / (
            math.log(grid[1]) - math.log(grid[0]))
        self._base_lo = math.log(vals[0])
        self._memo: dict[float, float] = {}

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        out = np.zeros_like(u)
        pos = u > 0.0
        lg = np.log(np.where(pos, u, 1.0))
        inside = pos & (lg >= self._lg_lo) & (lg <= self._lg_hi)
        out[inside] = np.exp(self._interp(lg[inside]))
        low = pos & (lg < self._lg_lo)
        out[low] = np.exp(self._base_lo + self._slope_lo * (lg[low] - self._lg_lo))
        high = pos & (lg > self._lg_hi)
        for i in np.nonzero(high)[0]:
            key = float(u[i])
            if key not in self._memo:
                self._memo[key] = psi_from_nu(self._model, key)
            out[i] = self._memo[key]
        return out[0] if scalar else out


# ---------------------------------------------------------------------------
# psi from nu by radial quadrature

_FULL_SPHERE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def _one_minus_cos(z: np.ndarray) -> np.ndarray:
    return 2.0 * np.sin(0.5 * z) ** 2


def _one_minus_j0(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    small = z < 1e-2
    zs = z[small]
    out[small] = zs**2 / 4.0 * (1.0 - zs**2 / 16.0 + zs**4 / 576.0)
    out[~small] = 1.0 - j0(z[~small])
    return out


def _one_minus_sinc(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    small = z < 1e-2
    zs = z[small]
    out[small] = zs**2 / 6.0 * (1.0 - zs**2 / 20.0 + zs**4 / 840.0)
    zl = z[~small]
    out[~small] = 1.0 - np.sin(zl) / zl
    return out


def psi_from_nu(model: LevyModel, u: float) -> float:
    """Radial characteristic exponent by quadrature of the jump density.

    The spherical average of 1 - cos reduces psi to one radial integral;
    it is split at the first kernel zero into a smooth near part, the pure
    tail mass, and an oscillatory remainder summed between kernel zeros
    with series acceleration.
    """
    if not (u > 0.0):
        raise ValueError("psi_from_nu needs u > 0")
    d = model.d
    nu = model.nu
    surf = _FULL_SPHERE[d]

    if d == 1:
        kernel_near, zeros, first = _one_minus_cos, ZeroSequence("cos", u), 0.5 * math.pi
    elif d == 2:
        zeros = ZeroSequence("bessel0", u)
        kernel_near, first = _one_minus_j0, float(zeros(0, 1)[0]) * u
    else:
        kernel_near, zeros, first = _one_minus_sinc, ZeroSequence("sin", u), math.pi

    a = first / u

    def near_f(r: float) -> float:
        # nu may overflow at radii where the kernel has underflowed; the
        # log-weighted contribution there is O(r^{2-alpha2}) and negligible
        rr = np.array([r])
        with np.errstate(all="ignore"):
            val = float((kernel_near(u * rr) * nu(rr) * rr ** (d - 1))[0])
        return val if math.isfinite(val) else 0.0

    near, near_err = quad_log(near_f, 0.0, a, epsabs=1e-13, epsrel=1e-9)

    def tail_f(r: float) -> float:
        rr = np.array([r])
        with np.errstate(all="ignore"):
            val = float((nu(rr) * rr ** (d - 1))[0])
        return val if math.isfinite(val) else 0.0

    tail, tail_err = quad_log(tail_f, a, np.inf, epsabs=1e-13, epsrel=1e-9)

    if d == 1:
        def osc_f(r):
            r = np.asarray(r)
            return np.cos(u * r) * nu(r)
    elif d == 2:
        def osc_f(r):
            r = np.asarray(r)
            return j0(u * r) * nu(r) * r
    else:
        def osc_f(r):
            r = np.asarray(r)
            return np.sin(u * r) / u * nu(r) * r

    osc, osc_err = oscillatory_sum(osc_f, zeros, rtol=1e-12)
    return surf * (near + tail - osc)


# ---------------------------------------------------------------------------
# density constructions


def _nu_stable(d: int, alpha: float):
    amp = stable_density_constant(d, alpha)

    def nu(r):
        return amp * np.asarray(r, dtype=float) ** -(d + alpha)

    return nu


def _nu_geometric_stable_1d_a1(r):
    r = np.asarray(r, dtype=float)
    return _trig_tail_aux(r) / (math.pi * r)


class _LogLogTable:
    """Lazily built monotone log-log interpolant of a positive scalar map,
    with power-law continuation beyond the tabulated range."""

    def __init__(self, value_fn, lo: float, hi: float, per_decade: int):
        self._value = value_fn
        self._range = (lo, hi, per_decade)
        self._built = False
        self._lock = threading.Lock()

    def _build(self):
        lo, hi, per_decade = self._range
        n = int(per_decade * math.log10(hi / lo)) + 1
        grid = np.geomspace(lo, hi, n)
        vals = np.array([self._value(x) for x in grid])
        if np.any(vals <= 0.0):
            keep = int(np.argmax(vals <= 0.0))
            if keep < 8:
                raise RuntimeError("tabulated function not positive")
            grid, vals = grid[:keep], vals[:keep]
        self._grid_lg = np.log(grid)
        self._interp = PchipInterpolator(self._grid_lg, np.log(vals),
                                         extrapolate=False)
        lo_slope = (math.log(vals[1]) - math.log(vals[0])) / (
            self._grid_lg[1] - self._grid_lg[0])
        hi_slope = (math.log(vals[-1]) - math.log(vals[-2])) / (
            self._grid_lg[-1] - self._grid_lg[-2])
        self._lo = (self._grid_lg[0], math.log(vals[0]), lo_slope)
        self._hi = (self._grid_lg[-1], math.log(vals[-1]), hi_slope)
        self._built = True

    def __call__(self, x):
        if not self._built:
            with self._lock:
                if not self._built:
                    self._build()
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        lg = np.log(x)
        out = np.empty_like(lg)
        lo_g, hi_g = self._lo[0], self._hi[0]
        mid = (lg >= lo_g) & (lg <= hi_g)
        out[mid] = self._interp(lg[mid])
        low = lg < lo_g
        out[low] = self._lo[1] + self._lo[2] * (lg[low] - lo_g)
        high = lg > hi_g
        out[high] = self._hi[1] + self._hi[2] * (lg[high] - hi_g)
        out = np.exp(out)
        return out[0] if scalar else out


def _nu_subordinate(d: int, alpha: float, tabulated: bool = True):
    """nu for the geometric alpha-stable family by integrating the
    subordinator Levy density (alpha/2)/s * E_{alpha/2}(-s^{alpha/2})
    against the Gaussian kernel with generator the full Laplacian."""
    beta = alpha / 2.0
    pref = beta
    # the Mittag-Leffler profile is smooth and monotone; tabulating it
    # removes the inner quadrature from every density evaluation
    ml_tab = _LogLogTable(lambda x: mittag_leffler_neg(beta, x),
                          1e-10, 1e14, 12)

    def nu_scalar(r: float) -> float:
        def f(s: float) -> float:
            if s <= 0.0:
                return 0.0
            expo = -r * r / (4.0 * s)
            if expo < -700.0:
                return 0.0
            with np.errstate(all="ignore"):
                ml = float(ml_tab(s ** beta))
                val = ((4.0 * math.pi * s) ** (-d / 2.0) * math.exp(expo)
                       * pref / s * ml)
            return val if math.isfinite(val) else 0.0

        # the integrand lives on [r^2/2800, ~r^2 * 1e6]; explicit bounds and
        # a split at the Gaussian shoulder keep the adaptive rule from
        # overlooking the bump on the infinite transformed axis
        s_lo = r * r / 2800.0
        s_mid = max(r * r, 1e-12)
        s_hi = max(1e8, 1e6 * r * r)
        v1, _ = quad_log(f, s_lo, s_mid, epsabs=1e-300, epsrel=1e-9)
        v2, _ = quad_log(f, s_mid, s_hi, epsabs=1e-300, epsrel=1e-9)
        return v1 + v2

    if not tabulated:
        return np.vectorize(nu_scalar, otypes=[float])
    return _LogLogTable(nu_scalar, 1e-8, 1e6, 16)


def _nu_inverted(dpsi) -> _LogLogTable:
    """Density from psi' by the one-dimensional sine-transform identity

        nu(r) = 1/(pi r) * int_0^inf sin(r u) psi'(u) du

    (one integration by parts of the cosine representation of psi).  The
    values are cached on a log grid with power-law continuation beyond it;
    the tail exponent there is exact for these families.
    """

    def value(r: float) -> float:
        zeros = ZeroSequence("sin", r)
        a = math.pi / r

        def f(u):
            u = np.asarray(u)
            return np.sin(r * u) * dpsi(u)

        edges = head_edges(0.0, a, per_decade=8)
        head_val = float(np.sum(panel_integrals(f, edges, nodes=24)))
        osc, _ = oscillatory_sum(f, zeros, rtol=1e-12)
        return (head_val + osc) / (math.pi * r)

    return _LogLogTable(value, 1e-9, 1e7, 24)


# ---------------------------------------------------------------------------
# constructors


def make_stable(d: int, alpha: float, name: str | None = None) -> LevyModel:
    """Isotropic alpha-stable model, psi(u) = u^alpha, exact density.

    Any alpha in (0, 2) is allowed as a Fourier / Monte Carlo oracle;
    the weight indices sit below 1 only for alpha < 1, which the
    in_scope_for_A flag records.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must be in (0, 2)")
    amp = stable_density_constant(d, alpha)
    # indices clamp below 1 for alpha >= 1; such models are Fourier/MC
    # oracles only and in_scope_for_A records that the clamp is a lie
    idx = min(alpha, 0.999)
    weight = WeightFunction(
        fn=lambda s: amp * np.asarray(s, dtype=float) ** alpha,
        beta=alpha, alpha1=idx, alpha2=idx,
        name=f"power-{alpha:g}")
    exact = None
    if alpha == 1.0:
        cd = math.exp(gammaln((d + 1) / 2.0)) / math.pi ** ((d + 1) / 2.0)

        def exact(t, r, _cd=cd, _d=d):
            t = np.asarray(t, dtype=float)
            r = np.asarray(r, dtype=float)
            return _cd * t / (t * t + r * r) ** ((_d + 1) / 2.0)

    return LevyModel(
        name or f"stable(a={alpha:g},d={d})", d, family="stable",
        params={"alpha": alpha},
        weight=weight, nu=_nu_stable(d, alpha),
        psi=lambda u: np.asarray(u, dtype=float) ** alpha,
        sampler=SamplerDescriptor((SubordinatorStage("stable", alpha / 2.0),)),
        exact_density=exact, self_similar_alpha=alpha)


def make_geometric_stable(d: int, alpha: float,
                          name: str | None = None) -> LevyModel:
    """Geometric stable model, psi(u) = log(1 + u^alpha)."""
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must be in (0, 2)")
    half = alpha / 2.0

    def ell(s):
        s = np.asarray(s, dtype=float)
        sa = s ** alpha
        return half * sa / (1.0 + sa)

    weight = WeightFunction(fn=ell, beta=alpha, alpha1=0.0, alpha2=0.0,
                            name=f"geostable-{alpha:g}")
    if d == 1 and alpha == 1.0:
        nu = _nu_geometric_stable_1d_a1
    else:
        nu = _nu_subordinate(d, alpha)
    return LevyModel(
        name or f"geostable(a={alpha:g},d={d})", d,
        family="geometric-stable", params={"alpha": alpha},
        weight=weight, nu=nu,
        psi=lambda u: np.log1p(np.asarray(u, dtype=float) ** alpha),
        sampler=SamplerDescriptor((SubordinatorStage("gamma"),
                                   SubordinatorStage("stable", half))))


def make_iterated_geometric_stable(d: int, alpha: float, iterations: int = 2,
                                   name: str | None = None) -> LevyModel:
    """Iterated geometric stable: log(1 + .) composed `iterations` times
    over u^alpha.  Density by oscillatory inversion (d = 1 only)."""
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must be in (0, 2)")
    if iterations < 2:
        raise ValueError("iterations must be >= 2 (use make_geometric_stable)")
    if d != 1:
        raise ValueError("iterated geometric stable density is implemented "
                         "for d = 1 only")
    m = iterations

    def psi(u):
        out = np.asarray(u, dtype=float) ** alpha
        for _ in range(m):
            out = np.log1p(out)
        return out

    def dpsi(u):
        u = np.asarray(u, dtype=float)
        inner = u ** alpha
        deriv = alpha * u ** (alpha - 1.0)
        for _ in range(m):
            deriv = deriv / (1.0 + inner)
            inner = np.log1p(inner)
        return deriv

    def ell(s):
        # s^2 phi'(s^2) for the composed Laplace exponent equals s psi'(s)/2
        s = np.asarray(s, dtype=float)
        return 0.5 * s * dpsi(s)

    weight = WeightFunction(fn=ell, beta=alpha, alpha1=-0.25, alpha2=0.0,
                            name=f"igs-{alpha:g}x{m}")
    stages = tuple([SubordinatorStage("gamma")] * m
                   + [SubordinatorStage("stable", alpha / 2.0)])
    return LevyModel(
        name or f"igs(a={alpha:g},n={m},d={d})", d,
        family="iterated-geometric-stable",
        params={"alpha": alpha, "iterations": m},
        weight=weight, nu=_nu_inverted(dpsi), psi=psi,
        sampler=SamplerDescriptor(stages))


def make_logp_model(d: int, p: float, beta: float = 0.5,
                    name: str | None = None) -> LevyModel:
    """Synthetic model with exact density r^-d w(1/r),
    w(s) = log(e+s)^p (s/(1+s))^beta.

    p >= -1 keeps the jump measure infinite; 0 < beta < 1 keeps the weight
    inside the admissible index range.  The smooth s/(1+s) roll-off (rather
    than a kinked power splice) keeps -nu'(r)/r monotone, so the long-range
    comparison condition holds on the whole axis.
    """
    if p < -1.0:
        raise ValueError("p < -1 makes the jump measure finite")
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must be in (0, 1)")

    def w(s):
        s = np.asarray(s, dtype=float)
        return softlog(s) ** p * (s / (1.0 + s)) ** beta

    def nu(r):
        r = np.asarray(r, dtype=float)
        return r ** -float(d) * w(1.0 / r)

    alpha2 = 0.25 if p > 0 else 0.0
    alpha1 = -0.25 if p < 0 else 0.0
    weight = WeightFunction(fn=w, beta=beta, alpha1=alpha1, alpha2=alpha2,
                            name=f"logp({p:g},{beta:g})")
    return LevyModel(name or f"logp(p={p:g},b={beta:g},d={d})", d,
                     family="log-weight", params={"p": p, "beta": beta},
                     weight=weight, nu=nu, psi=None, sampler=None)


def classify_ondiag(model: LevyModel, r_probe: float = 1e8) -> str:
    """Numeric trichotomy for finiteness of the density at the origin.

    Uses the growth of phi(r)/log(1+r) between two probe scales: growing
    means the density at 0 is finite for all t, decaying means it is
    infinite for all t, and a flat positive limit puts the model in the
    window regime (infinite for small t, finite for large t).
    """
    kit = model.kit
    r1 = math.sqrt(r_probe)
    q1 = kit.phi(r1) / math.log1p(r1)
    q2 = kit.phi(r_probe) / math.log1p(r_probe)
    growth = q2 / q1
    if growth >= 1.15:
        return "finite"
    if growth <= 0.85:
        return "divergent"
    return "window"


# ---------------------------------------------------------------------------
# condition (B) checker


def check_condition_B(model: LevyModel,
                      grid: np.ndarray | None = None, *,
                      slack: float = 1e-3) -> ScalingCheckResult:
    """Numerical test of the long-range comparison condition.

    -nu'(r)/r (finite differences) must be nonincreasing on the grid up to
    the given slack, and the shift comparison nu(r) <= c0 nu(r+1) must hold
    with a single fitted c0 for r >= 1.
    """
    if grid is None:
        grid = np.geomspace(1e-4, 1e2, 121)
    grid = np.sort(np.asarray(grid, dtype=float))
    if len(grid) < 3:
        raise ValueError("grid needs at least 3 points")
    eps = grid * 1e-5
    dnu = (model.nu(grid + eps) - model.nu(grid - eps)) / (2.0 * eps)
    g = -dnu / grid
    if np.any(g <= 0.0):
        return ScalingCheckResult(kind="condition-B", exponent=0.0,
                                  threshold=0.0, constant=math.inf,
                                  worst_violation=math.inf, passed=False,
                                  n_points=len(grid))
    growth = g[1:] / g[:-1]
    worst = float(np.max(growth))
    rs = grid[grid >= 1.0]
    if len(rs) == 0:
        rs = np.geomspace(1.0, 100.0, 20)
    c0 = float(np.max(model.nu(rs) / model.nu(rs + 1.0)))
    return ScalingCheckResult(kind="condition-B", exponent=0.0, threshold=0.0,
                              constant=c0, worst_violation=worst,
                              passed=worst <= 1.0 + slack,
                              n_points=len(grid))


# ---------------------------------------------------------------------------
# catalog

_CATALOG_BUILDERS = {
    "cauchy": lambda: make_stable(1, 1.0, name="cauchy"),
    "cauchy3d": lambda: make_stable(3, 1.0, name="cauchy3d"),
    "stable-half": lambda: make_stable(1, 0.5, name="stable-half"),
    "geostable": lambda: make_geometric_stable(1, 1.0, name="geostable"),
    "igs": lambda: make_iterated_geometric_stable(1, 1.0, 2, name="igs"),
    "log-p1": lambda: make_logp_model(1, 1.0, name="log-p1"),
    "log-p0": lambda: make_logp_model(1, 0.0, name="log-p0"),
    "log-pm05": lambda: make_logp_model(1, -0.5, name="log-pm05"),
    "log-pm1": lambda: make_logp_model(1, -1.0, name="log-pm1"),
}

_MODEL_CACHE: dict[str, LevyModel] = {}
_MODEL_CACHE_LOCK = threading.Lock()


def default_catalog() -> list[str]:
    """Names of the built-in catalog models."""
    return list(_CATALOG_BUILDERS)


def get_model(spec: str) -> LevyModel:
    """Resolve a model by catalog name or family spec string.

    Catalog names: see default_catalog().  Family specs look like
    'stable:alpha=0.7,d=2', 'geostable:alpha=0.5', 'logp:p=1,beta=0.5',
    'igs:alpha=1,iterations=2'.
    """
    with _MODEL_CACHE_LOCK:
        if spec in _MODEL_CACHE:
            return _MODEL_CACHE[spec]
    if spec in _CATALOG_BUILDERS:
        model = _CATALOG_BUILDERS[spec]()
    elif ":" in spec:
        fam, _, rest = spec.partition(":")
        kw: dict[str, float] = {}
        for item in rest.split(","):
            if not item:
                continue
            key, _, val = item.partition("=")
            kw[key.strip()] = float(val)
        d = int(kw.pop("d", 1))
        if fam == "stable":
            model = make_stable(d, kw.pop("alpha"))
        elif fam == "geostable":
            model = make_geometric_stable(d, kw.pop("alpha"))
        elif fam == "igs":
            model = make_iterated_geometric_stable(
                d, kw.pop("alpha"), int(kw.pop("iterations", 2)))
        elif fam == "logp":
            model = make_logp_model(d, kw.pop("p"), kw.pop("beta", 0.5))
        else:
            raise ValueError(f"unknown model family {fam!r}")
        if kw:
            raise ValueError(f"unused model parameters {sorted(kw)}")
    else:
        raise ValueError(f"unknown model {spec!r}; catalog: "
                         f"{', '.join(default_catalog())}")
    with _MODEL_CACHE_LOCK:
        _MODEL_CACHE.setdefault(spec, model)
        return _MODEL_CACHE[spec]
