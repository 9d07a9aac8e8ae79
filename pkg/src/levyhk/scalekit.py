"""Scale-function calculus for radial jump weights.

Given a weight ell (the slowly varying intensity profile of a radial jump
density nu(r) ~ r^-d * ell(1/r)), this module derives the scale functions
used by every estimate in the package:

    K(r)  = r^-2 * int_0^r s*ell(1/s) ds      truncated second-moment scale
    L(r)  = int_r^inf ell(1/s)/s ds           jump tail mass
    h(r)  = K(r) + L(r)                       exit-rate scale, h ~ psi(1/.)
    phi(u) = L(1/u)                           tail mass in frequency form
    V~(r) = h(r)^(-1/2)                       renewal proxy (boundary scale)

plus the running supremum ell*, its right-continuous generalized inverse,
the effective radius theta_a(r, t) = max(r, 1/ell_inv(a/t)), and the
large-time variants ell_hat / phi_hat.  Scaling and almost-monotonicity
checkers (falsification tests, not proofs) live here as well.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .quadrature import quad

__all__ = [
    "WeightFunction",
    "ScaleKit",
    "ScalingCheckResult",
    "check_scaling",
    "check_almost_monotone",
]


@dataclass(frozen=True)
class WeightFunction:
    """Radial jump intensity profile ell: (0, inf) -> (0, inf).

    fn must be numpy-vectorized.  beta is the growth exponent near 0
    (ell(s) ~ s^beta, beta > 0 keeps int_0^1 ell(s)/s ds finite); alpha1 and
    alpha2 bound the large-argument scaling with alpha2 < 1 strictly.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    beta: float
    alpha1: float
    alpha2: float
    smooth: bool = True
    name: str = ""

    def __post_init__(self):
        if not (self.beta > 0.0):
            raise ValueError("beta must be positive")
        if not (self.alpha1 <= self.alpha2 < 1.0):
            raise ValueError("need alpha1 <= alpha2 < 1")

    def __call__(self, s):
        return self.fn(s)

    def validate(self) -> None:
        """Cheap sanity probes of the declared invariants."""
        probe = np.geomspace(1e-8, 1e8, 33)
        vals = np.asarray(self.fn(probe), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ValueError("weight must be positive and finite on (0, inf)")
        # dyadic tail of int_0^1 ell(s)/s ds must decay geometrically
        ks = np.arange(8, 20)
        tails = np.array([
            quad(lambda s: self.fn(s) / s, 2.0 ** -(k + 1), 2.0 ** -k)[0]
            for k in ks
        ])
        ratios = tails[1:] / tails[:-1]
        if np.any(ratios > 0.98):
            raise ValueError("int_0^1 ell(s)/s ds does not converge "
                             "geometrically; beta > 0 violated?")


class _RunningSup:
    """sup of g over [1, r], cached on a demand-grown log grid.

    64 points per decade with golden-section refinement around interior
    grid maxima; the underlying g is continuous so this resolves the sup
    to grid accuracy.  Thread-safe: the arrays are swapped atomically
    under a lock, readers see either the old or the new grid.
    """

    def __init__(self, g, per_decade: int = 64):
        self._g = g
        self._per_decade = per_decade
        self._lock = threading.Lock()
        self._x = np.array([1.0])
        self._vals = np.array([float(g(np.array([1.0]))[0])])
        self._run = self._vals.copy()
        self._grow_to(10.0)

    def _grow_to(self, r: float) -> None:
        with self._lock:
            hi = self._x[-1]
            if r <= hi:
                return
            target = 10.0 ** math.ceil(math.log10(r) + 1e-12)
            n = max(2, int(round(self._per_decade * math.log10(target / hi))))
            new_x = np.geomspace(hi, target, n + 1)[1:]
            new_vals = np.asarray(self._g(new_x), dtype=float)
            x = np.concatenate([self._x, new_x])
            vals = np.concatenate([self._vals, new_vals])
            run = np.maximum.accumulate(vals)
            # refine interior local maxima of g; fold the refined peak into
            # the running sup from its location onward
            interior = np.where(
                (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])
            )[0] + 1
            for i in interior:
                if x[i] < hi:  # already refined in a previous growth step
                    continue
                res = optimize.minimize_scalar(
                    lambda s: -float(self._g(np.array([s]))[0]),
                    bounds=(x[i - 1], x[i + 1]), method="bounded",
                    options={"xatol": x[i] * 1e-10})
                peak = -res.fun
                j = np.searchsorted(x, res.x)
                if peak > run[min(j, len(run) - 1)]:
                    run[j:] = np.maximum(run[j:], peak)
            self._x, self._vals, self._run = x, vals, run

    def __call__(self, r: float) -> float:
        if r < 1.0:
            raise ValueError("running sup defined for r >= 1")
        if r > self._x[-1]:
            self._grow_to(r)
        x, run = self._x, self._run
        j = int(np.searchsorted(x, r, side="right")) - 1
        best = run[j]
        if r > x[j]:
            seg = np.geomspace(x[j], r, 9)[1:]
            best = max(best, float(np.max(np.asarray(self._g(seg)))))
        return float(best)

    @property
    def grid_max(self) -> float:
        return float(self._x[-1])


def _memoized(compute):
    """Single-writer memo cache for scalar r -> value functions."""
    def wrapper(self, r: float) -> float:
        cache = self._caches.setdefault(compute.__name__, {})
        hit = cache.get(r)
        if hit is not None:
            return hit
        val = compute(self, r)
        with self._cache_lock:
            cache[r] = val
        return val
    wrapper.__name__ = compute.__name__
    wrapper.__doc__ = compute.__doc__
    return wrapper


class ScaleKit:
    """Derived scale functions of a weight, memoized and shareable.

    All evaluations are pure after construction; caches are dictionaries
    written under a lock (concurrent readers are safe).
    """

    #: sentinel returned by ell_inverse when sup ell* <= t (bounded weights)
    INF = math.inf

    def __init__(self, weight: WeightFunction, *, epsabs: float = 1e-12,
                 epsrel: float = 1e-10, validate: bool = True):
        if validate:
            weight.validate()
        self.weight = weight
        self.epsabs = epsabs
        self.epsrel = epsrel
        self._caches: dict[str, dict] = {}
        self._cache_lock = threading.Lock()
        self._sup_lock = threading.Lock()
        self._ell_sup: _RunningSup | None = None
        self._inv_ell_sup: _RunningSup | None = None

    # -- core integrals ------------------------------------------------

    @_memoized
    def K(self, r: float) -> float:
        """Truncated second-moment scale r^-2 int_0^r s ell(1/s) ds."""
        if not (r > 0.0 and math.isfinite(r)):
            raise ValueError("K needs finite r > 0")
        ell = self.weight.fn

        # s = e^v resolves the endpoint: integrand e^{2v} ell(e^{-v});
        # cut where e^{2v} * ell(e^{-v}) <= e^{(2-alpha2)v} has underflowed
        def g(v: float) -> float:
            if v < -320.0:
                return 0.0
            return math.exp(2.0 * v) * float(ell(math.exp(-v)))

        val, _ = quad(g, -np.inf, math.log(r),
                      epsabs=self.epsabs, epsrel=self.epsrel)
        return val / (r * r)

    @_memoized
    def L(self, r: float) -> float:
        """Jump tail mass int_r^inf ell(1/s)/s ds; strictly decreasing."""
        if not (r > 0.0):
            raise ValueError("L needs r > 0")
        ell = self.weight.fn

        # integrand ell(e^{-v}) ~ e^{-beta v} at +inf; cut past underflow
        def g(v: float) -> float:
            if v > 700.0:
                return 0.0
            return float(ell(math.exp(-v)))

        val, _ = quad(g, math.log(r), np.inf,
                      epsabs=self.epsabs, epsrel=self.epsrel)
        return val

    def h(self, r: float) -> float:
        """Exit-rate scale K(r) + L(r); h'(r) = -2K(r)/r for smooth weights."""
        return self.K(r) + self.L(r)

    def phi(self, u: float) -> float:
        """Accumulated small-scale mass int_0^u ell(s)/s ds = L(1/u)."""
        if u < 0.0:
            raise ValueError("phi needs u >= 0")
        if u == 0.0:
            return 0.0
        return self.L(1.0 / u)

    def v_proxy(self, r: float) -> float:
        """Renewal proxy h(r)^(-1/2); strictly increasing boundary scale."""
        if not (r > 0.0):
            raise ValueError("v_proxy needs r > 0")
        return self.h(r) ** -0.5

    # -- running suprema and inverses -----------------------------------

    def _sup(self) -> _RunningSup:
        if self._ell_sup is None:
            with self._sup_lock:
                if self._ell_sup is None:
                    self._ell_sup = _RunningSup(self.weight.fn)
        return self._ell_sup

    def _inv_sup(self) -> _RunningSup:
        if self._inv_ell_sup is None:
            with self._sup_lock:
                if self._inv_ell_sup is None:
                    self._inv_ell_sup = _RunningSup(
                        lambda s: 1.0 / np.asarray(self.weight.fn(s)))
        return self._inv_ell_sup

    def ell_star(self, r: float) -> float:
        """Running supremum of the weight over [1, r]."""
        if r < 1.0:
            raise ValueError("ell_star needs r >= 1")
        return self._sup()(r)

    def ell_inverse(self, t: float, *, r_cap: float = 1e80) -> float:
        """inf{r >= 1 : ell*(r) > t}, right-continuous.

        Returns 1.0 when ell*(1) > t and the INF sentinel when the running
        sup never exceeds t (possible only for bounded weights); theta maps
        the sentinel to a zero cutoff.
        """
        if not (t > 0.0):
            raise ValueError("ell_inverse needs t > 0")
        sup = self._sup()
        if sup(1.0) > t:
            return 1.0
        lo, hi = 1.0, 10.0
        while sup(hi) <= t:
            lo = hi
            hi *= 100.0
            if hi > r_cap:
                # plateau detection: no growth across two decades means the
                # sup has saturated below t
                if sup(r_cap) <= t and sup(r_cap) <= sup(r_cap / 100.0) * (1 + 1e-9):
                    return self.INF
                if sup(r_cap) <= t:
                    return self.INF
                hi = r_cap
                break
        for _ in range(200):
            if hi / lo - 1.0 < 1e-13:
                break
            mid = math.sqrt(lo * hi)
            if sup(mid) > t:
                hi = mid
            else:
                lo = mid
        return hi

    def theta(self, a: float, r: float, t: float) -> float:
        """Effective radius max(r, 1/ell_inv(a/t)).

        Nondecreasing in r and t, nonincreasing in a.  The INF sentinel
        from ell_inverse turns the cutoff term into 0.
        """
        if not (a > 0.0 and t > 0.0):
            raise ValueError("theta needs a, t > 0")
        if r < 0.0:
            raise ValueError("theta needs r >= 0")
        inv = self.ell_inverse(a / t)
        cutoff = 0.0 if math.isinf(inv) else 1.0 / inv
        return max(r, cutoff)

    def hat_ell(self, u: float) -> float:
        """Running supremum of 1/ell over [1, u] (large-time variant)."""
        if u < 1.0:
            raise ValueError("hat_ell needs u >= 1")
        return self._inv_sup()(u)

    def hat_phi(self, u: float) -> float:
        """int_1^u dk / (k * hat_ell(k)); zero at u = 1, nondecreasing."""
        if u < 1.0:
            raise ValueError("hat_phi needs u >= 1")
        if u == 1.0:
            return 0.0
        cache = self._caches.setdefault("hat_phi", {})
        if u in cache:
            return cache[u]
        val, _ = quad(lambda v: 1.0 / self.hat_ell(math.exp(v)),
                      0.0, math.log(u),
                      epsabs=self.epsabs, epsrel=self.epsrel)
        with self._cache_lock:
            cache[u] = val
        return val

    # -- export ----------------------------------------------------------

    def calibration_grid(self, r_lo: float = 1e-4, r_hi: float = 1e2,
                         points: int = 121) -> dict[str, np.ndarray]:
        r = np.geomspace(r_lo, r_hi, points)
        return {
            "r": r,
            "K": np.array([self.K(x) for x in r]),
            "L": np.array([self.L(x) for x in r]),
            "h": np.array([self.h(x) for x in r]),
            "phi": np.array([self.phi(1.0 / x) for x in r]),
            "v_proxy": np.array([self.v_proxy(x) for x in r]),
        }

    def write_calibration_csv(self, path, **grid_kwargs) -> None:
        cols = self.calibration_grid(**grid_kwargs)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "K", "L", "h", "phi", "v_proxy"])
            for i in range(len(cols["r"])):
                w.writerow([format(cols[k][i], ".12g")
                            for k in ("r", "K", "L", "h", "phi", "v_proxy")])


# -- scaling condition checkers ------------------------------------------

_KINDS = ("wls-inf", "wus-inf", "wls-0", "wus-0")


@dataclass(frozen=True)
class ScalingCheckResult:
    """Outcome of a weak-scaling or almost-monotonicity falsification test."""

    kind: str
    exponent: float
    threshold: float
    constant: float
    worst_violation: float
    passed: bool
    n_points: int = 0

    def __bool__(self) -> bool:
        return self.passed


def _default_grid(kind: str, threshold: float, points_per_decade: int,
                  decades: float) -> np.ndarray:
    if kind.endswith("inf"):
        return np.geomspace(threshold, threshold * 10.0 ** decades,
                            int(points_per_decade * decades) + 1)
    return np.geomspace(threshold * 10.0 ** -decades, threshold,
                        int(points_per_decade * decades) + 1)


def check_scaling(f, kind: str, exponent: float, threshold: float = 1.0,
                  grid: np.ndarray | None = None, *, tolerance: float = 0.01,
                  points_per_decade: int = 16,
                  decades: float = 6.0) -> ScalingCheckResult:
    """Falsification test of a one-sided weak scaling bound.

    Lower kinds assert f(R)/f(r) >= c (R/r)^exponent over ordered pairs in
    the relevant range, upper kinds the reverse inequality.  The witness
    constant is fitted on the half of the grid nearest the threshold; the
    worst violation ratio is how much that constant must be stretched to
    cover every sampled pair.  An exact power law passes with ratio 1; an
    exponent mismatch makes the ratio grow with the grid span and fails.
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    if grid is None:
        grid = _default_grid(kind, threshold, points_per_decade, decades)
    grid = np.asarray(grid, dtype=float)
    if kind.endswith("inf"):
        grid = grid[grid >= threshold]
    else:
        grid = grid[grid <= threshold]
    if len(grid) < 2:
        raise ValueError("grid needs at least 2 points in the checked range")
    grid = np.sort(grid)
    vals = np.array([float(f(x)) for x in grid])
    if np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
        raise ValueError("f must be positive and finite on the grid")
    lg = np.log(vals) - exponent * np.log(grid)

    def one_sided(levels: np.ndarray) -> float:
        # log of the best constant covering all ordered pairs
        if kind.startswith("wls"):
            return float(np.min(levels - np.maximum.accumulate(levels)))
        return float(np.max(levels - np.minimum.accumulate(levels)))

    half = max(2, len(lg) // 2)
    if kind.endswith("inf"):
        cal = lg[:half]           # half nearest the threshold
    else:
        cal = lg[-half:]
    c_cal = one_sided(cal)
    c_full = one_sided(lg)
    if kind.startswith("wls"):
        violation = math.exp(c_cal - c_full)
    else:
        violation = math.exp(c_full - c_cal)
    return ScalingCheckResult(kind=kind, exponent=exponent,
                              threshold=threshold,
                              constant=math.exp(c_full),
                              worst_violation=violation,
                              passed=violation <= 1.0 + tolerance,
                              n_points=len(grid))


def check_almost_monotone(f, direction: str, c0: float = 1.0,
                          grid: np.ndarray | None = None, *,
                          tolerance: float = 1.0,
                          points_per_decade: int = 16,
                          decades: float = 8.0) -> ScalingCheckResult:
    """Falsification test of almost monotonicity beyond c0.

    Compares f against its running sup (direction "increasing") or running
    inf ("decreasing") on a log grid.  The fitted constant is the largest
    ratio seen; the test fails when the ratio keeps growing between the
    calibration half and the full grid, the signature of an unbounded
    oscillation.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError("direction must be 'increasing' or 'decreasing'")
    if grid is None:
        grid = np.geomspace(c0, c0 * 10.0 ** decades,
                            int(points_per_decade * decades) + 1)
    grid = np.asarray(grid, dtype=float)
    grid = np.sort(grid[grid >= c0])
    if len(grid) < 2:
        raise ValueError("grid needs at least 2 points at or beyond c0")
    vals = np.array([float(f(x)) for x in grid])
    if np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
        raise ValueError("f must be positive and finite on the grid")
    if direction == "increasing":
        ratios = np.maximum.accumulate(vals) / vals
    else:
        ratios = vals / np.minimum.accumulate(vals)
    half = max(2, len(ratios) // 2)
    c_cal = float(np.max(ratios[:half]))
    c_full = float(np.max(ratios))
    violation = c_full / c_cal
    return ScalingCheckResult(kind=f"almost-{direction}", exponent=0.0,
                              threshold=c0, constant=c_full,
                              worst_violation=violation,
                              passed=violation <= 1.0 + tolerance,
                              n_points=len(grid))
