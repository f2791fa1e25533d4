"""Monte Carlo volumes of recurrence sets and scaling-law fits.

A point ``x`` is recurrent for ``(T, eps)`` when ``d(e^{tR}x, x) <= eps`` for
some ``t`` in ``[T0/2, T]``.  The continuous infimum over ``t`` is replaced by
a grid whose step ``dt <= eps / (2 L)`` (``L`` the flow's velocity bound), so
a genuine return within ``eps/2`` is never stepped over.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .flows import Flow

CHUNK = 1 << 14
DEFAULT_BUDGET = 1e11
Z95 = float(norm.ppf(0.975))


class BudgetError(RuntimeError):
    """Requested work exceeds the configured operation budget."""


class DegenerateSeries(ValueError):
    pass


def op_budget() -> float:
    """Operation cap from ``REEBLAB_BUDGET`` (default ``1e11``)."""
    raw = os.environ.get("REEBLAB_BUDGET")
    return float(raw) if raw else DEFAULT_BUDGET


def wilson_interval(hits: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = hits / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


@dataclass
class RecurrenceConfig:
    T: float
    eps: float
    n_samples: int = 100_000
    seed: int = 0
    dt: float | None = None
    T0: float | None = None
    workers: int = 1

    def resolved(self, flow: Flow) -> "RecurrenceConfig":
        """Fill in ``dt`` and ``T0`` from the flow and check the grid condition."""
        if not (self.T > 0 and self.eps > 0):
            raise ValueError("T and eps must be positive")
        L = flow.velocity_bound
        dt_max = self.eps / (2.0 * L)
        dt = dt_max if self.dt is None else float(self.dt)
        if dt <= 0 or dt > dt_max * (1 + 1e-12):
            raise ValueError(f"dt={dt} violates dt <= eps/(2 L) = {dt_max}")
        T0 = flow.shortest_period if self.T0 is None else float(self.T0)
        return RecurrenceConfig(self.T, self.eps, int(self.n_samples), int(self.seed), dt, T0,
                                int(self.workers))

    def time_grid(self) -> np.ndarray:
        """``T0/2, T0/2 + dt, ...`` up to and including ``T`` (empty if ``T < T0/2``)."""
        start = self.T0 / 2.0
        if self.T < start:
            return np.zeros(0)
        k = int(math.floor((self.T - start) / self.dt + 1e-9))
        grid = start + self.dt * np.arange(k + 1)
        if self.T - grid[-1] > 1e-12 * max(1.0, self.T):
            grid = np.append(grid, self.T)
        return grid


@dataclass
class RecurrenceEstimate:
    fraction: float
    ci_low: float
    ci_high: float
    hits: int
    n_samples: int
    config: dict = field(default_factory=dict)
    radius: float = 0.0
    scale: float = 1.0  # measure of the sampled space (time length for lifted sets)

    @property
    def volume(self) -> float:
        return self.fraction * self.scale

    @property
    def volume_ci(self) -> tuple[float, float]:
        return self.ci_low * self.scale, self.ci_high * self.scale

    def to_dict(self) -> dict:
        d = asdict(self)
        d["volume"] = self.volume
        return d


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _chunks(n: int):
    return [(c, min(CHUNK, n - c * CHUNK)) for c in range((n + CHUNK - 1) // CHUNK)]


def _run_chunks(fn, n: int, workers: int) -> int:
    jobs = _chunks(n)
    if workers <= 1:
        return sum(fn(c, m) for c, m in jobs)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return sum(ex.map(lambda job: fn(*job), jobs))


def is_recurrent(flow: Flow, x, cfg: RecurrenceConfig, radius: float | None = None) -> bool:
    """Does ``x`` return within ``eps`` (or ``radius``) at some grid time in ``[T0/2, T]``?"""
    cfg = cfg.resolved(flow)
    grid = cfg.time_grid()
    if grid.size == 0:
        return False
    r = cfg.eps if radius is None else radius
    return bool(flow.recurrence_hits(np.atleast_2d(x), grid, r)[0])


def extended_radius(flow: Flow, cfg: RecurrenceConfig) -> float:
    """Inflated radius ``eps (1 + slack)``, ``slack = 1 + dt L / eps``, used for the extended set."""
    cfg = cfg.resolved(flow)
    slack = 1.0 + cfg.dt * flow.velocity_bound / cfg.eps
    return cfg.eps * (1.0 + slack)


def _check_budget(n: int, steps: int) -> None:
    work = float(n) * float(max(steps, 1))
    cap = op_budget()
    if work > cap:
        raise BudgetError(f"requested {work:.3g} operations exceeds budget {cap:.3g}")


def estimate_volume(flow: Flow, cfg: RecurrenceConfig, extended: bool = False) -> RecurrenceEstimate:
    """Fraction of sampled points in the recurrence set (or its inflated extension)."""
    cfg = cfg.resolved(flow)
    if cfg.n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    grid = cfg.time_grid()
    _check_budget(cfg.n_samples, len(grid))
    radius = extended_radius(flow, cfg) if extended else cfg.eps

    def work(chunk, m):
        if grid.size == 0:
            return 0
        x = flow.sample(_chunk_rng(cfg.seed, chunk), m)
        return int(np.count_nonzero(flow.recurrence_hits(x, grid, radius)))

    hits = _run_chunks(work, cfg.n_samples, cfg.workers)
    lo, hi = wilson_interval(hits, cfg.n_samples)
    echo = asdict(cfg)
    echo["extended"] = extended
    return RecurrenceEstimate(hits / cfg.n_samples, lo, hi, hits, cfg.n_samples, echo, radius)


def estimate_lifted_volume(flow: Flow, cfg: RecurrenceConfig) -> RecurrenceEstimate:
    """Monte Carlo volume of ``{(x, t) : d(e^{tR}x, x) <= eps, t in [T0/2, T]}``.

    ``fraction`` is the hit rate of uniform ``(x, t)``; ``volume`` multiplies
    by the time length ``T - T0/2``.
    """
    cfg = cfg.resolved(flow)
    if cfg.n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    t0 = cfg.T0 / 2.0
    length = max(0.0, cfg.T - t0)
    _check_budget(cfg.n_samples, 1)

    def work(chunk, m):
        if length == 0.0:
            return 0
        rng = _chunk_rng(cfg.seed, chunk)
        x = flow.sample(rng, m)
        t = t0 + length * rng.random(m)
        moved = flow.evolve(x, t)
        return int(np.count_nonzero(flow.distance(moved, x) <= cfg.eps))

    hits = _run_chunks(work, cfg.n_samples, cfg.workers)
    lo, hi = wilson_interval(hits, cfg.n_samples)
    echo = asdict(cfg)
    echo["lifted"] = True
    return RecurrenceEstimate(hits / cfg.n_samples, lo, hi, hits, cfg.n_samples, echo, cfg.eps,
                              scale=length)


@dataclass
class ScalingFit:
    mode: str
    exponent: float
    intercept: float
    residual: float
    stderr: float
    ci: tuple
    points: list

    def to_dict(self) -> dict:
        return asdict(self)


def scaling_fit(series, mode: str = "elliptic", check_ci: bool = True) -> ScalingFit:
    """Fit ``log V`` against ``log T`` (elliptic) or ``T`` (anosov).

    ``series`` holds ``(T, value)`` pairs where ``value`` is a float or a
    :class:`RecurrenceEstimate` (its ``volume`` and Wilson bounds are used as
    weights: the log-CI half-width sets each point's standard deviation).

    Returns the slope (power-law exponent or exponential rate), RMS residual,
    standard error and a 95% interval for the slope.
    """
    if mode not in ("elliptic", "anosov"):
        raise ValueError("mode must be 'elliptic' or 'anosov'")
    Ts, vals, sig = [], [], []
    raw = []
    weighted = True
    for T, v in series:
        if isinstance(v, RecurrenceEstimate):
            if v.fraction in (0.0, 1.0):
                raw.append(v.fraction)
                continue
            lo, hi = v.volume_ci
            if check_ci and hi / lo >= 3.0:
                raise ValueError(f"CI ratio {hi / lo:.2f} >= 3 at T={T}; increase samples")
            Ts.append(float(T))
            vals.append(v.volume)
            sig.append((math.log(hi) - math.log(lo)) / (2 * Z95))
            raw.append(v.fraction)
        else:
            v = float(v)
            weighted = False
            raw.append(v)
            if v <= 0:
                continue
            Ts.append(float(T))
            vals.append(v)
            sig.append(1.0)
    if raw and all(r in (0.0, 1.0) for r in raw):
        raise DegenerateSeries("all volumes are 0 or 1")
    if len(Ts) < 4:
        raise ValueError(f"need at least 4 usable series points, got {len(Ts)}")
    X = np.log(Ts) if mode == "elliptic" else np.asarray(Ts)
    Y = np.log(vals)
    w = 1.0 / np.asarray(sig) ** 2
    W = np.sum(w)
    xb = np.sum(w * X) / W
    yb = np.sum(w * Y) / W
    sxx = np.sum(w * (X - xb) ** 2)
    slope = float(np.sum(w * (X - xb) * (Y - yb)) / sxx)
    icpt = float(yb - slope * xb)
    res = Y - (icpt + slope * X)
    rms = float(np.sqrt(np.mean(res ** 2)))
    if weighted:
        stderr = float(math.sqrt(1.0 / sxx))
    else:
        stderr = float(math.sqrt(np.sum(res ** 2) / max(len(X) - 2, 1) / sxx))
    return ScalingFit(mode, slope, icpt, rms, stderr,
                      (slope - Z95 * stderr, slope + Z95 * stderr),
                      [[float(a), float(b)] for a, b in zip(Ts, vals)])
