"""Exact-increment Monte Carlo for killed processes.

Increments are sampled through the subordinator chain (gamma stages by
shape-adaptive rejection inside numpy, one-sided stable stages by the
Chambers-Mallows-Stuck construction), then a Gaussian step with variance
twice the subordinated time per coordinate.  Killing is checked only at
skeleton times, which biases survival upward; every headline estimator
carries a one-level step-halving bias flag to quantify it.

Reproducibility: paths are split into fixed-size blocks, each block draws
from its own counter-based stream keyed by (seed, level, block index), and
results merge in block order.  Worker count therefore never changes any
output bit.
"""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .free_kernel import KernelTable, free_density
from .geometry import Domain
from .models import LevyModel

__all__ = [
    "McConfig", "McEstimate", "SurvivalCurve", "LargeTimeReport",
    "ExitSample", "one_sided_stable", "sample_increments", "simulate_paths",
    "survival_probability", "mean_exit_time", "dirichlet_kernel",
    "green_function", "decay_rate",
]


def _worker_cap() -> int:
    env = os.environ.get("LEVYHK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class McConfig:
    """Simulation budget and stream identity."""

    paths: int
    dt: float = 1e-3
    horizon: float = math.inf
    seed: int = 0
    block_size: int = 20000
    refinement_levels: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.paths < 1000:
            raise ValueError("estimates need at least 1000 paths")
        if not (self.dt > 0.0):
            raise ValueError("dt must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    paths: int
    dt: float
    bias_flag: bool = False
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SurvivalCurve:
    x: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    paths: int
    dt: float
    bias_flag: bool = False


@dataclass(frozen=True)
class LargeTimeReport:
    """Leading survival decay rate with its fit window and scale brackets."""

    rate: float
    window: tuple[float, float]
    r_squared: float
    onset: float
    bracket: tuple[float, float]  # (h(r2), h(r1/2)) raw scale values
    curve: SurvivalCurve


# ---------------------------------------------------------------------------
# samplers


def one_sided_stable(rng: np.random.Generator, beta: float,
                     n: int) -> np.ndarray:
    """Standard positive beta-stable variates, E e^{-lam S} = e^{-lam^beta}.

    Chambers-Mallows-Stuck in Kanter's one-sided form: with U uniform on
    (0, pi) and W unit exponential,

        S = [sin(bU) sin((1-b)U)^{(1-b)/b} / sin(U)^{1/b}] * W^{-(1-b)/b}.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must be in (0, 1)")
    u = rng.uniform(0.0, math.pi, n)
    w = rng.standard_exponential(n)
    q = (1.0 - beta) / beta
    with np.errstate(all="ignore"):
        core = (np.sin(beta * u)
                * np.sin((1.0 - beta) * u) ** q
                / np.sin(u) ** (1.0 / beta))
        out = core * w ** -q
    return out


def _subordinator_increments(rng: np.random.Generator, stages, dt: float,
                             n: int) -> np.ndarray:
    tau = np.full(n, dt)
    for stage in stages:
        if stage.kind == "gamma":
            tau = rng.gamma(shape=tau)
        elif stage.kind == "stable":
            with np.errstate(all="ignore"):
                tau = tau ** (1.0 / stage.beta) * one_sided_stable(
                    rng, stage.beta, n)
        else:
            raise ValueError(f"unknown stage kind {stage.kind!r}")
    return tau


def sample_increments(model: LevyModel, rng: np.random.Generator, dt: float,
                      n: int) -> np.ndarray:
    """n exact increments of the process over one step of length dt."""
    if model.sampler is None:
        raise ValueError(f"{model.name} has no exact-increment sampler")
    s = _subordinator_increments(rng, model.sampler.stages, dt, n)
    with np.errstate(all="ignore"):
        scale = np.sqrt(2.0 * s)
    return rng.standard_normal((n, model.d)) * scale[:, None]


def _block_rng(seed: int, level: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(level, block))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# killed-path simulation


@dataclass
class ExitSample:
    """First-exit record of a block-structured path population.

    exit_step[i] is the first skeleton index outside the domain (0 means
    never exited within the simulated steps, in which case exit time and
    position are undefined); positions are the first outside point and the
    last interior point.
    """

    dt: float
    steps: int
    n: int
    exit_step: np.ndarray
    exit_pos: np.ndarray
    last_inside: np.ndarray

    @property
    def exited(self) -> np.ndarray:
        return self.exit_step > 0

    def exit_times(self, half_step: bool = True) -> np.ndarray:
        """Exit times of the exited paths, midpoint-corrected by default."""
        k = self.exit_step[self.exited].astype(float)
        return (k - 0.5) * self.dt if half_step else k * self.dt

    def survival_at(self, t: float) -> int:
        """Number of paths with every skeleton point inside up to time t."""
        k = int(math.floor(t / self.dt + 1e-9))
        return int(np.sum((self.exit_step == 0) | (self.exit_step > k)))


class _BlockState:
    def __init__(self, model, domain, x0, dt, rng, n, d):
        self.model = model
        self.domain = domain
        self.dt = dt
        self.rng = rng
        self.pos = np.tile(np.asarray(x0, dtype=float).reshape(1, d), (n, 1))
        self.ids = np.arange(n)
        self.exit_step = np.zeros(n, dtype=np.int64)
        self.exit_pos = np.full((n, d), np.nan)
        self.last_inside = np.tile(np.asarray(x0, dtype=float).reshape(1, d),
                                   (n, 1))
        self.steps_done = 0

    def advance(self, to_step: int) -> None:
        model, domain = self.model, self.domain
        while self.steps_done < to_step and len(self.ids):
            self.steps_done += 1
            m = len(self.ids)
            inc = sample_increments(model, self.rng, self.dt, m)
            new = self.pos + inc
            inside = domain.contains(new)
            if inside.ndim == 0:
                inside = np.array([inside])
            out = ~inside
            if np.any(out):
                gone = self.ids[out]
                self.exit_step[gone] = self.steps_done
                self.exit_pos[gone] = new[out]
                self.last_inside[gone] = self.pos[out]
                self.ids = self.ids[inside]
                new = new[inside]
            self.pos = new

    @property
    def alive(self) -> int:
        return len(self.ids)


def _run_blocks(model, domain, x0, dt, steps, paths, seed, level, block_size,
                workers, stop_rule=None) -> ExitSample:
    """Simulate paths in deterministic blocks, optionally extending the
    horizon until stop_rule(alive_fraction, steps) returns a verdict."""
    d = model.d
    n_blocks = (paths + block_size - 1) // block_size
    sizes = [block_size] * (n_blocks - 1) + [paths - block_size * (n_blocks - 1)]
    states = [_BlockState(model, domain, x0, dt, _block_rng(seed, level, b),
                          sizes[b], d) for b in range(n_blocks)]

    def advance_all(to_step: int):
        n_workers = min(workers, _worker_cap(), n_blocks)
        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                list(pool.map(lambda s: s.advance(to_step), states))
        else:
            for s in states:
                s.advance(to_step)

    target = steps
    extensions = 0
    while True:
        advance_all(target)
        if stop_rule is None:
            break
        alive = sum(s.alive for s in states) / paths
        verdict = stop_rule(alive, target, extensions)
        if verdict == "done":
            break
        if verdict == "fail":
            raise RuntimeError(
                f"horizon too small: {alive:.2%} of paths still alive после "
                f"{extensions} extensions")
        target = verdict
        extensions += 1

    exit_step = np.concatenate([s.exit_step for s in states])
    exit_pos = np.concatenate([s.exit_pos for s in states])
    last_inside = np.concatenate([s.last_inside for s in states])
    return ExitSample(dt=dt, steps=target, n=paths, exit_step=exit_step,
                      exit_pos=exit_pos, last_inside=last_inside)


def simulate_paths(model: LevyModel, config: McConfig, x0,
                   domain: Domain | None = None, *,
                   steps: int | None = None, level: int = 0) -> ExitSample:
    """Skeleton simulation with first-exit recording.

    Without a domain the paths never exit (an all-space rectangle is
    implied); with one, each path is truncated at its first outside grid
    time.
    """
    if model.sampler is None:
        raise ValueError(f"{model.name} has no exact-increment sampler")
    if steps is None:
        if not math.isfinite(config.horizon):
            raise ValueError("either steps or a finite horizon is required")
        steps = int(round(config.horizon / config.dt))

    class _Everywhere:
        def contains(self, x):
            return np.ones(len(np.atleast_2d(x)), dtype=bool)

    dom = domain if domain is not None else _Everywhere()
    if domain is not None and not domain.contains(np.asarray(x0, dtype=float)):
        raise ValueError("start point is outside the domain")
    return _run_blocks(model, dom, x0, config.dt, steps, config.paths,
                       config.seed, level, config.block_size, config.workers)


# ---------------------------------------------------------------------------
# estimators


def survival_probability(model: LevyModel, domain: Domain, x,
                         t_grid, config: McConfig) -> SurvivalCurve:
    """P_x(tau_D > t_i) with binomial errors and a step-halving bias flag."""
    t_grid = np.asarray(t_grid, dtype=float)
    steps = int(math.ceil(float(np.max(t_grid)) / config.dt - 1e-9))
    sample = simulate_paths(model, config, x, domain, steps=steps)
    counts = np.array([sample.survival_at(t) for t in t_grid], dtype=float)
    p = counts / config.paths
    se = np.sqrt(np.maximum(p * (1.0 - p), 1e-300) / config.paths)
    bias = False
    if config.refinement_levels >= 1:
        fine = replace(config, dt=config.dt / 2.0)
        fine_sample = simulate_paths(model, fine, x, domain, steps=2 * steps,
                                     level=1)
        p2 = np.array([fine_sample.survival_at(t) for t in t_grid]) / config.paths
        se2 = np.sqrt(np.maximum(p2 * (1.0 - p2), 1e-300) / config.paths)
        bias = bool(np.any(np.abs(p2 - p) > 2.0 * np.hypot(se, se2)))
    return SurvivalCurve(x=np.atleast_1d(np.asarray(x, dtype=float)),
                         t_grid=t_grid, values=p, stderr=se,
                         paths=config.paths, dt=config.dt, bias_flag=bias)


def _exit_sample_adaptive(model, domain, x, config, *, tail: float = 1e-3,
                          level: int = 0) -> ExitSample:
    """Simulate until the surviving fraction is below `tail` (at most three
    horizon doublings beyond the initial guess)."""
    kit = model.kit
    r1 = domain.scale()[0]
    guess = 8.0 / kit.h(r1)
    steps0 = max(int(math.ceil(guess / config.dt)), 10)
    if math.isfinite(config.horizon):
        steps0 = int(math.ceil(config.horizon / config.dt))

    def stop_rule(alive, steps, extensions):
        if alive < tail:
            return "done"
        if extensions >= 3:
            return "fail"
        return steps * 2

    class _Wrap:
        def contains(self, p):
            return domain.contains(p)

    return _run_blocks(model, _Wrap(), x, config.dt, steps0, config.paths,
                       config.seed, level, config.block_size, config.workers,
                       stop_rule=stop_rule)


def mean_exit_time(model: LevyModel, domain: Domain, x,
                   config: McConfig) -> McEstimate:
    """E_x[tau_D] from midpoint-corrected exit indices.

    Survivors at the final horizon are censored at the horizon; the
    adaptive rule keeps their mass below 1e-3.
    """
    if not domain.bounded:
        raise ValueError("mean exit time needs a bounded domain")

    def run(cfg, level):
        sample = _exit_sample_adaptive(model, domain, x, cfg, level=level)
        times = np.full(sample.n, sample.steps * sample.dt)
        times[sample.exited] = sample.exit_times()
        return float(np.mean(times)), float(np.std(times) / math.sqrt(sample.n))

    value, se = run(config, 0)
    bias = False
    if config.refinement_levels >= 1:
        v2, se2 = run(replace(config, dt=config.dt / 2.0), 1)
        bias = abs(v2 - value) > 2.0 * math.hypot(se, se2)
    return McEstimate(value=value, stderr=se, paths=config.paths,
                      dt=config.dt, bias_flag=bias)


def dirichlet_kernel(model: LevyModel, domain: Domain, t: float, x, y,
                     config: McConfig, *, table: KernelTable | None = None,
                     clip_bound=None, exit_sample: ExitSample | None = None
                     ) -> McEstimate:
    """Killed-kernel estimator by free-kernel subtraction:

        p_D(t,x,y) = p(t, y-x) - E_x[ p(t - tau, y - Y_tau); tau < t ].

    Evaluations of the free kernel at (tiny time, tiny displacement) pairs
    are clipped at an upper-bound value when the model diverges on the
    diagonal; the clipped fraction is reported and flags the estimate when
    it exceeds 1%.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not domain.contains(x) or not domain.contains(y):
        raise ValueError("x and y must be interior points")
    direct = free_density(model, t, float(np.linalg.norm(y - x))).density
    steps = int(math.ceil(t / config.dt - 1e-9))
    if exit_sample is None:
        exit_sample = simulate_paths(model, config, x, domain, steps=steps)
    sub, se, clipped = _subtraction_term(model, exit_sample, t, y,
                                         config, table, clip_bound)
    raw = direct - sub
    value = max(raw, 0.0)
    return McEstimate(value=value, stderr=se, paths=config.paths,
                      dt=config.dt, bias_flag=clipped > 0.01,
                      extras={"raw": raw, "direct": direct,
                              "clipped_fraction": clipped})


def _subtraction_term(model, sample: ExitSample, t, y, config, table,
                      clip_bound):
    dt = sample.dt
    mask = sample.exited & (sample.exit_step * dt - 0.5 * dt < t)
    contrib = np.zeros(sample.n)
    clipped_n = 0
    if np.any(mask):
        taus = (sample.exit_step[mask].astype(float) - 0.5) * dt
        disp = np.linalg.norm(sample.exit_pos[mask]
                              - y.reshape(1, -1), axis=1)
        s = t - taus
        tiny = (s < dt) & (disp < math.sqrt(dt))
        if table is None:
            kit = model.kit
            r2 = 3.0 * float(np.max(disp)) if len(disp) else 1.0
            table = KernelTable(model, dt / 4.0, max(t, dt), 1e-4,
                                max(r2, 1.0))
        vals = table(np.maximum(s, dt / 4.0), np.maximum(disp, 1e-4))
        if np.any(tiny):
            clipped_n = int(np.sum(tiny))
            if clip_bound is not None:
                vals[tiny] = np.minimum(
                    vals[tiny],
                    np.array([clip_bound(si, ri)
                              for si, ri in zip(np.maximum(s[tiny], dt / 4.0),
                                                disp[tiny])]))
        contrib[np.nonzero(mask)[0]] = vals
    mean = float(np.mean(contrib))
    se = float(np.std(contrib) / math.sqrt(sample.n))
    return mean, se, clipped_n / sample.n


def green_function(model: LevyModel, domain: Domain, x, y,
                   config: McConfig, *, t_max: float | None = None,
                   table: KernelTable | None = None) -> McEstimate:
    """Occupation density G_D(x,y) = int_0^inf p_D(t,x,y) dt.

    One exit sample from x serves the whole time axis: the estimator is
    the exact time integral of the free kernel minus the per-path integral
    of the subtracted kernel, plus an exponential tail fitted to the late
    survival decay.  The tail contribution is reported separately.
    """
    if not domain.bounded:
        raise ValueError("the Green function needs a bounded domain")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not domain.contains(x) or not domain.contains(y):
        raise ValueError("x and y must be interior points")
    sample = _exit_sample_adaptive(model, domain, x, config, tail=5e-3)
    horizon = sample.steps * sample.dt
    if t_max is None:
        t_max = horizon
    r_xy = float(np.linalg.norm(y - x))

    from .quadrature import quad_log
    direct, _ = quad_log(lambda s: free_density(model, s, r_xy).density,
                         0.0, t_max, epsabs=1e-12, epsrel=1e-7)

    dt = sample.dt
    mask = sample.exited
    taus = (sample.exit_step[mask].astype(float) - 0.5) * dt
    disp = np.linalg.norm(sample.exit_pos[mask] - y.reshape(1, -1), axis=1)
    if table is None:
        r_hi = max(2.0 * domain.scale()[1] + r_xy, float(np.max(disp, initial=1.0)))
        table = KernelTable(model, dt / 4.0, t_max, 1e-4, r_hi)
    cum = _CumulativeKernel(table)
    per_path = np.zeros(sample.n)
    spans = np.maximum(t_max - taus, 0.0)
    per_path[np.nonzero(mask)[0]] = cum(spans, np.maximum(disp, 1e-4))
    sub = float(np.mean(per_path))
    se = float(np.std(per_path) / math.sqrt(sample.n))

    # exponential tail beyond t_max from the late survival slope
    curve_t = np.linspace(0.5 * horizon, horizon, 8)
    surv = np.array([sample.survival_at(s) for s in curve_t]) / sample.n
    tail = 0.0
    lam = math.nan
    good = surv > 0
    if np.sum(good) >= 4 and surv[good][-1] < surv[good][0]:
        slope, _ = np.polyfit(curve_t[good], np.log(surv[good]), 1)
        lam = max(-slope, 1e-12)
        p_end = dirichlet_kernel(model, domain, t_max, x, y, config,
                                 table=table, exit_sample=sample).value
        tail = p_end / lam
    value = max(direct - sub, 0.0) + tail
    return McEstimate(value=value, stderr=se, paths=config.paths, dt=dt,
                      extras={"tail": tail, "decay_rate": lam,
                              "direct": direct, "subtraction": sub})


class _CumulativeKernel:
    """int_0^s p(u, r) du on the kernel table's grid, bilinear in
    (s, log r), exact quadratic start below the first time node."""

    def __init__(self, table: KernelTable):
        from scipy.interpolate import RegularGridInterpolator
        s_lo, s_hi = table.s_bounds
        r_lo, r_hi = table.r_bounds
        s = np.geomspace(s_lo, s_hi, 160)
        r = np.geomspace(r_lo, r_hi, table._interp.grid[1].shape[0])
        r = np.exp(table._interp.grid[1])
        vals = table(s[:, None], r[None, :])
        cum = np.zeros_like(vals)
        cum[1:] = np.cumsum(0.5 * (vals[1:] + vals[:-1])
                            * np.diff(s)[:, None], axis=0)
        # mass below the first node: p ~ u * nu(r) there
        head = 0.5 * s[0] ** 2 * np.asarray(table.model.nu(r))
        cum += head[None, :]
        self._interp = RegularGridInterpolator(
            (s, np.log(r)), cum, method="linear", bounds_error=False,
            fill_value=None)
        self._bounds = (s[0], s[-1], r[0], r[-1])

    def __call__(self, s, r):
        s = np.asarray(s, dtype=float)
        r = np.asarray(r, dtype=float)
        s_lo, s_hi, r_lo, r_hi = self._bounds
        out = np.zeros(np.broadcast(s, r).shape)
        s_b = np.broadcast_to(s, out.shape)
        r_b = np.broadcast_to(r, out.shape)
        live = s_b > 0.0
        pts = np.column_stack([np.clip(s_b[live], s_lo, s_hi),
                               np.log(np.clip(r_b[live], r_lo, r_hi))])
        out[live] = np.maximum(self._interp(pts), 0.0)
        return out


def decay_rate(model: LevyModel, domain: Domain, config: McConfig, *,
               fit_band: tuple[float, float] = (0.02, 0.35)
               ) -> LargeTimeReport:
    """Leading exponential decay rate of the survival probability.

    Fits -d/dt log P(tau > t) by least squares over the window where the
    estimated survival sits inside fit_band (noise floor excluded), and
    reports the raw h(r2), h(r1/2) scale values for bracket comparisons.
    """
    if not domain.bounded:
        raise ValueError("decay rate needs a bounded domain")
    r1, r2, x1, _ = domain.scale()
    floor = max(fit_band[0], 30.0 / config.paths)
    sample = _exit_sample_adaptive(model, domain, x1, config, tail=floor / 2.0)
    horizon = sample.steps * sample.dt
    t_grid = np.linspace(0.0, horizon, 161)[1:]
    counts = np.array([sample.survival_at(s) for s in t_grid])
    p = counts / sample.n
    se = np.sqrt(np.maximum(p * (1.0 - p), 1e-300) / sample.n)
    window = (p >= floor) & (p <= fit_band[1])
    if np.sum(window) < 6:
        raise RuntimeError("survival curve leaves no usable fit window; "
                           "increase paths or horizon")
    tw = t_grid[window]
    yw = np.log(p[window])
    slope, intercept = np.polyfit(tw, yw, 1)
    pred = slope * tw + intercept
    ss_res = float(np.sum((yw - pred) ** 2))
    ss_tot = float(np.sum((yw - np.mean(yw)) ** 2))
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    kit = model.kit
    curve = SurvivalCurve(x=np.atleast_1d(x1), t_grid=t_grid, values=p,
                          stderr=se, paths=sample.n, dt=sample.dt)
    return LargeTimeReport(rate=max(-slope, 0.0),
                           window=(float(tw[0]), float(tw[-1])),
                           r_squared=r_sq, onset=float(tw[0]),
                           bracket=(kit.h(r2), kit.h(r1 / 2.0)),
                           curve=curve)
