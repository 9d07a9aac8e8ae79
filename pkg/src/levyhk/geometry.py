"""Domains with the inner/outer ball property: interval unions, balls and
annuli.  Exact boundary distance and membership are what the killed-path
Monte Carlo needs, so only variants with closed-form distance are offered.

Points are numpy arrays of shape (d,) or batches of shape (n, d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Domain", "Ball", "Annulus", "IntervalUnion", "parse_domain"]


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        if d != 1:
            raise ValueError("scalar point in a multi-dimensional domain")
        return pts.reshape(1, 1), True
    if pts.ndim == 1:
        if d == 1:
            return pts.reshape(-1, 1), False
        if pts.shape[0] != d:
            raise ValueError(f"point has dimension {pts.shape[0]}, domain {d}")
        return pts.reshape(1, d), True
    if pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, domain {d}")
    return pts, False


class Domain:
    """Open set with exact boundary distance and membership tests."""

    d: int
    bounded: bool

    #: localization radius and curvature bound (metadata only)
    characteristics: tuple[float, float]

    def delta(self, x):
        """Distance to the boundary (positive inside and outside)."""
        raise NotImplementedError

    def contains(self, x):
        """Strict membership in the open set."""
        raise NotImplementedError

    def scale(self) -> tuple[float, float, np.ndarray, np.ndarray]:
        """(r1, r2, x1, x2) with B(x1, r1) inside and B(x2, r2) outside."""
        raise NotImplementedError

    def inradius(self) -> float:
        return self.scale()[0]

    def sample_interior(self, rule: str, **params):
        """Test points: 'grid' fills the domain, 'boundary-layer' places
        points at prescribed boundary distances along an inward normal."""
        raise NotImplementedError

    def _check_scale_witnesses(self) -> None:
        r1, r2, x1, x2 = self.scale()
        probe = np.linspace(0.0, 1.0, 7)[:, None] * np.eye(self.d)[0]
        inner = x1 + probe * r1 * 0.999
        if not bool(np.all(self.contains(inner))):
            raise AssertionError("inner witness ball escapes the domain")


@dataclass(frozen=True)
class Ball(Domain):
    """Open ball B(center, radius)."""

    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center",
                           tuple(float(c) for c in np.atleast_1d(self.center)))

    @property
    def d(self):
        return len(self.center)

    bounded = True

    @property
    def characteristics(self):
        return (self.radius, 1.0 / self.radius)

    def _radii(self, x):
        pts, scalar = _as_points(x, self.d)
        rho = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return rho, scalar

    def delta(self, x):
        rho, scalar = self._radii(x)
        out = np.abs(self.radius - rho)
        return float(out[0]) if scalar else out

    def contains(self, x):
        rho, scalar = self._radii(x)
        out = rho < self.radius
        return bool(out[0]) if scalar else out

    def scale(self):
        c = np.asarray(self.center)
        return (self.radius, self.radius, c, c)

    def sample_interior(self, rule: str, **params):
        c = np.asarray(self.center)
        if rule == "boundary-layer":
            deltas = np.asarray(params["deltas"], dtype=float)
            if np.any(deltas >= self.radius):
                raise ValueError("boundary-layer depth exceeds the inradius")
            direction = np.asarray(params.get("direction",
                                              np.eye(self.d)[0]), dtype=float)
            direction = direction / np.linalg.norm(direction)
            return c + (self.radius - deltas)[:, None] * direction
        if rule == "grid":
            n = int(params.get("count", 16))
            axes = [np.linspace(c[i] - self.radius, c[i] + self.radius,
                                n + 2)[1:-1] for i in range(self.d)]
            mesh = np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, self.d)
            return mesh[self.contains(mesh)]
        raise ValueError(f"unknown sampling rule {rule!r}")


@dataclass(frozen=True)
class Annulus(Domain):
    """Open annulus {r_in < |x - center| < r_out}."""

    center: tuple
    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0.0 < self.r_in < self.r_out):
            raise ValueError("need 0 < r_in < r_out")
        object.__setattr__(self, "center",
                           tuple(float(c) for c in np.atleast_1d(self.center)))

    @property
    def d(self):
        return len(self.center)

    bounded = True

    @property
    def characteristics(self):
        return (min(self.r_in, (self.r_out - self.r_in) / 2.0),
                1.0 / self.r_in)

    def _radii(self, x):
        pts, scalar = _as_points(x, self.d)
        rho = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return rho, scalar

    def delta(self, x):
        rho, scalar = self._radii(x)
        out = np.minimum(np.abs(rho - self.r_in), np.abs(self.r_out - rho))
        return float(out[0]) if scalar else out

    def contains(self, x):
        rho, scalar = self._radii(x)
        out = (rho > self.r_in) & (rho < self.r_out)
        return bool(out[0]) if scalar else out

    def scale(self):
        c = np.asarray(self.center)
        mid = 0.5 * (self.r_in + self.r_out)
        x1 = c.copy()
        x1[0] += mid
        return ((self.r_out - self.r_in) / 2.0, self.r_out, x1, c)

    def sample_interior(self, rule: str, **params):
        c = np.asarray(self.center)
        if rule == "boundary-layer":
            deltas = np.asarray(params["deltas"], dtype=float)
            if np.any(deltas >= (self.r_out - self.r_in) / 2.0):
                raise ValueError("boundary-layer depth exceeds the inradius")
            side = params.get("side", "outer")
            direction = np.asarray(params.get("direction",
                                              np.eye(self.d)[0]), dtype=float)
            direction = direction / np.linalg.norm(direction)
            rho = (self.r_out - deltas if side == "outer"
                   else self.r_in + deltas)
            return c + rho[:, None] * direction
        if rule == "grid":
            n = int(params.get("count", 16))
            axes = [np.linspace(c[i] - self.r_out, c[i] + self.r_out,
                                n + 2)[1:-1] for i in range(self.d)]
            mesh = np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, self.d)
            return mesh[self.contains(mesh)]
        raise ValueError(f"unknown sampling rule {rule!r}")


@dataclass(frozen=True)
class IntervalUnion(Domain):
    """Union of disjoint open intervals on the line.

    Intervals must be separated by positive gaps; lengths and gaps set the
    localization radius.  Infinite endpoints are allowed.
    """

    intervals: tuple

    d = 1

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        if not ivs:
            raise ValueError("need at least one interval")
        for a, b in ivs:
            if not a < b:
                raise ValueError(f"empty interval ({a}, {b})")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if not b0 < a1:
                raise ValueError("intervals must be disjoint with gaps")
        object.__setattr__(self, "intervals", ivs)

    @property
    def bounded(self):
        return (math.isfinite(self.intervals[0][0])
                and math.isfinite(self.intervals[-1][1]))

    @property
    def characteristics(self):
        lengths = [b - a for a, b in self.intervals]
        gaps = [a1 - b0 for (_, b0), (a1, _)
                in zip(self.intervals, self.intervals[1:])]
        r0 = min([x for x in lengths + gaps if math.isfinite(x)],
                 default=math.inf)
        return (r0, 0.0)

    def _endpoints(self):
        return np.array([e for iv in self.intervals for e in iv
                         if math.isfinite(e)])

    def delta(self, x):
        pts, scalar = _as_points(x, 1)
        xs = pts[:, 0]
        ends = self._endpoints()
        if len(ends) == 0:
            out = np.full_like(xs, math.inf)
        else:
            out = np.min(np.abs(xs[:, None] - ends[None, :]), axis=1)
        return float(out[0]) if scalar else out

    def contains(self, x):
        pts, scalar = _as_points(x, 1)
        xs = pts[:, 0]
        out = np.zeros(len(xs), dtype=bool)
        for a, b in self.intervals:
            out |= (xs > a) & (xs < b)
        return bool(out[0]) if scalar else out

    def scale(self):
        if not self.bounded:
            raise ValueError("scale is defined for bounded domains")
        lo = self.intervals[0][0]
        hi = self.intervals[-1][1]
        x2 = np.array([(lo + hi) / 2.0])
        r2 = (hi - lo) / 2.0
        a, b = max(self.intervals, key=lambda iv: iv[1] - iv[0])
        x1 = np.array([(a + b) / 2.0])
        r1 = (b - a) / 2.0
        return (r1, r2, x1, x2)

    def sample_interior(self, rule: str, **params):
        if rule == "boundary-layer":
            deltas = np.asarray(params["deltas"], dtype=float)
            side = params.get("side", "left")
            iv = self.intervals[int(params.get("index", 0))]
            a, b = iv
            half = (b - a) / 2.0
            if np.any(deltas >= half):
                raise ValueError("boundary-layer depth exceeds the "
                                 "half-length")
            xs = a + deltas if side == "left" else b - deltas
            return xs.reshape(-1, 1)
        if rule == "grid":
            if not self.bounded:
                raise ValueError("grid sampling needs a bounded domain")
            n = int(params.get("count", 16))
            pts = []
            for a, b in self.intervals:
                pts.append(np.linspace(a, b, n + 2)[1:-1])
            return np.concatenate(pts).reshape(-1, 1)
        raise ValueError(f"unknown sampling rule {rule!r}")


def parse_domain(spec: str) -> Domain:
    """Parse CLI domain strings.

    interval:a,b[;a2,b2...]   union of open intervals
    ball:cx[,cy,cz],r         ball, last number is the radius
    annulus:cx[,...],rin,rout annulus, last two numbers are the radii
    """
    kind, _, rest = spec.partition(":")
    if not rest:
        raise ValueError(f"malformed domain spec {spec!r}")
    if kind == "interval":
        ivs = []
        for part in rest.split(";"):
            nums = [float(v) for v in part.split(",")]
            if len(nums) != 2:
                raise ValueError(f"interval needs two endpoints: {part!r}")
            ivs.append(tuple(nums))
        return IntervalUnion(tuple(ivs))
    nums = [float(v) for v in rest.split(",")]
    if kind == "ball":
        if len(nums) < 2:
            raise ValueError("ball spec needs center and radius")
        return Ball(tuple(nums[:-1]), nums[-1])
    if kind == "annulus":
        if len(nums) < 3:
            raise ValueError("annulus spec needs center and two radii")
        return Annulus(tuple(nums[:-2]), nums[-2], nums[-1])
    raise ValueError(f"unknown domain kind {kind!r}")
