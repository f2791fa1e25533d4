"""Topological entropy from separated sets, Lipschitz constants of distorted
metrics, and the quasi-metric / chain-metric constructions for Anosov maps.

The metric constructions work with a *map* (anything exposing ``iterate``,
``distance`` and ``sample``).  For a flow this is its time-one map; for the
cat-map suspension the natural choice is the global section ``s = 0``, where
the time-one map is the toral automorphism itself and flow-direction pairs,
which the instability hypothesis excludes, never occur.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from . import _backend
from .flows import Flow, SuspensionFlow, SuspensionParams, torus_distance


class SaturationWarning(UserWarning):
    """Separated-set counts stopped growing because the cloud is too coarse."""


class JExhausted(RuntimeError):
    """No instability violation found within the scan window."""


# ---------------------------------------------------------------------------
# Bowen distance and separated sets
# ---------------------------------------------------------------------------


def _grid(T: float, dt: float) -> np.ndarray:
    if T <= 0:
        return np.zeros(1)
    k = int(math.ceil(T / dt - 1e-9))
    return np.linspace(0.0, T, k + 1)


def bowen_distance(flow: Flow, x, y, T: float, dt: float = 0.05):
    """``max_{t in grid[0, T]} d(e^{tR}x, e^{tR}y)``; vectorized over leading axes."""
    if T < 0:
        raise ValueError("T must be >= 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best = None
    for t in _grid(T, dt):
        d = flow.distance(flow.evolve(x, t), flow.evolve(y, t))
        best = d if best is None else np.maximum(best, d)
    return best


@dataclass
class BowenConfig:
    T: float
    eps: float
    cloud: np.ndarray
    dt: float = 0.05
    greedy_restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        self.cloud = np.atleast_2d(np.asarray(self.cloud, dtype=float))
        if len(self.cloud) == 0:
            raise ValueError("cloud must be nonempty")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class SeparatedSet:
    count: int
    indices: np.ndarray
    restart_counts: list

    def __int__(self):
        return self.count


def suspension_lattice_cloud(M: int = 400, levels: int = 10) -> np.ndarray:
    """Points ``(i/M, j/M, l/levels)``: a regular cloud of ``M^2 * levels`` points."""
    g = np.arange(M) / M
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    X = np.repeat(X, levels, axis=0)
    s = np.tile(np.arange(levels) / levels, M * M)
    return np.column_stack([X, s])


def _greedy_generic(flow: Flow, cloud, times, eps, order) -> np.ndarray:
    orbits = np.stack([flow.evolve(cloud, t) for t in times])  # (S, M, d)
    kept = np.zeros(len(order), dtype=np.int64)
    nk = 0
    for i in order:
        if nk:
            ks = kept[:nk]
            d0 = flow.distance(orbits[0, ks], orbits[0, i][None, :])
            near = ks[d0 < eps]
            if near.size:
                # whole trajectories at once: (S, K) distances
                d = flow.distance(orbits[:, near], orbits[:, i][:, None, :])
                if np.any(d.max(axis=0) < eps):
                    continue
        kept[nk] = i
        nk += 1
    return kept[:nk].copy()


def max_separated(flow: Flow, cfg: BowenConfig) -> SeparatedSet:
    """Greedy maximal ``(T, eps)``-separated subset of the cloud (a lower bound on ``N(T, eps)``).

    Each restart visits the cloud in a fresh seeded random order; the largest
    packing is returned.  The cloud should resolve the space at scale below
    ``eps/2`` for the bound to be meaningful.
    """
    times = _grid(cfg.T, cfg.dt)
    rng = np.random.default_rng(cfg.seed)
    best = None
    counts = []
    for _ in range(max(1, cfg.greedy_restarts)):
        order = rng.permutation(len(cfg.cloud)).astype(np.int64)
        if isinstance(flow, SuspensionFlow):
            c = cfg.cloud
            kept = _backend.kernels.suspension_greedy_pack(
                np.ascontiguousarray(c[:, :2]),
                np.ascontiguousarray(c[:, 2]),
                order,
                np.ascontiguousarray(flow.params.array),
                np.ascontiguousarray(times),
                float(cfg.eps),
            )
        else:
            kept = _greedy_generic(flow, cfg.cloud, times, cfg.eps, order)
        counts.append(len(kept))
        if best is None or len(kept) > len(best):
            best = kept
    return SeparatedSet(len(best), np.asarray(best), counts)


@dataclass
class HtopEstimate:
    htop: float
    per_eps_slopes: dict
    counts: dict
    saturated: dict
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "htop": self.htop,
            "per_eps_slopes": {str(k): v for k, v in self.per_eps_slopes.items()},
            "counts": {str(k): v for k, v in self.counts.items()},
            "saturated": {str(k): v for k, v in self.saturated.items()},
            "warnings": list(self.warnings),
        }


def estimate_htop(flow: Flow, cloud, eps_schedule: Sequence[float] = (0.05,),
                  T_schedule: Sequence[float] = (1, 2, 3, 4), dt: float = 0.05,
                  restarts: int = 1, seed: int = 0,
                  saturation: float = 0.1) -> HtopEstimate:
    """Slope of ``ln N(T, eps)`` against ``T`` at the smallest ``eps``.

    Horizons where the packing exceeds ``saturation * len(cloud)`` are treated
    as resolution-limited: they are reported, excluded from the fit, and a
    :class:`SaturationWarning` is issued.
    """
    eps_schedule = list(eps_schedule)
    T_schedule = list(T_schedule)
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps_schedule must be decreasing")
    if any(b <= a for a, b in zip(T_schedule, T_schedule[1:])):
        raise ValueError("T_schedule must be increasing")
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    slopes, counts, sat, notes = {}, {}, {}, []
    for eps in eps_schedule:
        Ns = []
        for T in T_schedule:
            cfg = BowenConfig(T, eps, cloud, dt, restarts, seed)
            Ns.append(max_separated(flow, cfg).count)
        flags = [n > saturation * len(cloud) for n in Ns]
        # once saturated, later horizons are unreliable too
        for i in range(1, len(flags)):
            flags[i] = flags[i] or flags[i - 1]
        counts[eps] = list(zip(T_schedule, Ns))
        sat[eps] = flags
        use = [(T, n) for (T, n), f in zip(counts[eps], flags) if not f]
        if any(flags):
            msg = f"eps={eps}: saturation at T >= {T_schedule[flags.index(True)]}"
            notes.append(msg)
            warnings.warn(msg, SaturationWarning, stacklevel=2)
        if len(use) >= 2:
            t = np.array([u[0] for u in use], dtype=float)
            y = np.log([u[1] for u in use])
            slopes[eps] = float(np.polyfit(t, y, 1)[0])
        else:
            slopes[eps] = float("nan")
    return HtopEstimate(slopes[eps_schedule[-1]], slopes, counts, sat, notes)


# ---------------------------------------------------------------------------
# Maps used by the metric constructions
# ---------------------------------------------------------------------------


class ToralMap:
    """A hyperbolic toral automorphism acting on ``R^2/Z^2`` with the flat metric."""

    dim = 2

    def __init__(self, params: SuspensionParams):
        self.params = params
        self._A = params.array.astype(float)
        self._Ainv = params.inverse.astype(float)

    def iterate(self, x, j: int):
        x = np.array(x, dtype=float, copy=True)
        B = self._A if j >= 0 else self._Ainv
        for _ in range(abs(int(j))):
            x = x @ B.T
            x = x - np.floor(x)
        return x

    def distance(self, x, y):
        return torus_distance(x, y)

    def sample(self, rng, n):
        return rng.random((n, 2))


class TimeOneMap:
    """Time-one map of a flow."""

    def __init__(self, flow: Flow):
        self.flow = flow
        self.dim = flow.dim

    def iterate(self, x, j: int):
        return self.flow.evolve(x, float(j))

    def distance(self, x, y):
        return self.flow.distance(x, y)

    def sample(self, rng, n):
        return self.flow.sample(rng, n)


def section_map(flow: Flow):
    """Return the map used for metric constructions of ``flow``."""
    if isinstance(flow, SuspensionFlow):
        return ToralMap(flow.params)
    return TimeOneMap(flow)


# ---------------------------------------------------------------------------
# Distorted metrics and Lipschitz constants
# ---------------------------------------------------------------------------


@dataclass
class DistortedMetric:
    """A distance comparable to the base distance ``d^g``.

    ``c_lo * d^g <= d <= c_hi * (d^g)^s`` is the declared class; ``minus``
    marks the ``s-`` variant (exponent ``s - e`` for some ``e > 0``).
    """

    evaluate: Callable
    s: float = 1.0
    minus: bool = False
    c_lo: float = 1.0
    c_hi: float = 1.0
    label: str = "base"
    valid_below: float = np.inf  # comparability is asserted for d^g below this

    def __call__(self, x, y):
        return self.evaluate(x, y)

    def check_class(self, base_d, d) -> dict:
        base_d = np.asarray(base_d, dtype=float)
        d = np.asarray(d, dtype=float)
        m = (base_d > 0) & (base_d <= self.valid_below)
        lo = int(np.sum(self.c_lo * base_d[m] > d[m] * (1 + 1e-12)))
        hi = int(np.sum(d[m] > self.c_hi * base_d[m] ** self.s * (1 + 1e-12)))
        return {"checked": int(m.sum()), "lower_violations": lo, "upper_violations": hi}


def base_metric(space) -> DistortedMetric:
    return DistortedMetric(space.distance, 1.0, False, 1.0, 1.0, "base")


@dataclass
class LipschitzEstimate:
    L: float
    SL: float
    n_pairs: int
    local_scale: float

    def to_dict(self):
        return asdict(self)


def lipschitz_constant(metric: DistortedMetric, flow, time: float, pairs,
                       local_scale: float | None = None) -> LipschitzEstimate:
    """``sup d(e^t x, e^t y)/d(x, y)`` over the pairs, and the local skewness.

    ``SL`` is the infimum of the same ratio over pairs with ``d(x, y) <
    local_scale`` (default: the smallest decile of sampled separations), the
    finite-sample version of ``sup_eps inf_{d < eps}``.
    """
    x, y = pairs
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d0 = np.asarray(metric(x, y), dtype=float)
    keep = d0 > 0
    x, y, d0 = x[keep], y[keep], d0[keep]
    if time == 0:
        return LipschitzEstimate(1.0, 1.0, int(len(d0)), 0.0)
    if hasattr(flow, "evolve"):
        fx, fy = flow.evolve(x, time), flow.evolve(y, time)
    else:
        fx, fy = flow.iterate(x, int(time)), flow.iterate(y, int(time))
    ratio = np.asarray(metric(fx, fy), dtype=float) / d0
    if local_scale is None:
        local_scale = float(np.quantile(d0, 0.1)) * (1 + 1e-12)
    loc = d0 <= local_scale
    SL = float(ratio[loc].min()) if loc.any() else float("nan")
    return LipschitzEstimate(float(ratio.max()), SL, int(len(d0)), float(local_scale))


def multiscale_pairs(space, rng, n: int, scales=(1e-4, 1e-3, 1e-2, 1e-1), directions=None):
    """Pairs ``(x, x + r v)`` at several scales (``v`` random or from ``directions``) plus random pairs."""
    xs, ys = [], []
    per = max(1, n // (len(scales) + 1))
    dim = space.dim
    for r in scales:
        x = space.sample(rng, per)
        if directions is None:
            v = rng.standard_normal((per, dim))
        else:
            v = np.asarray(directions)[rng.integers(0, len(directions), per)]
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        y = x + r * v
        if isinstance(space, (ToralMap, SuspensionFlow)):
            y[..., :2] = y[..., :2] - np.floor(y[..., :2])
            if y.shape[-1] == 3:
                y[..., 2] = np.clip(y[..., 2], 0.0, 1.0 - 1e-12)
        elif hasattr(space, "normalize"):
            y = space.normalize(y)
        xs.append(x)
        ys.append(y)
    xs.append(space.sample(rng, per))
    ys.append(space.sample(rng, per))
    return np.concatenate(xs), np.concatenate(ys)


# ---------------------------------------------------------------------------
# Quasi-metric rho, chain metric D, and the d_k family
# ---------------------------------------------------------------------------


@dataclass
class ExpansionEstimate:
    alpha_min: float
    alpha_median: float
    alpha_max: float


def estimate_expansion(space, rng, n_pairs: int = 4000, sep: float = 1e-4) -> ExpansionEstimate:
    """One-step ``max(fwd, bwd)`` expansion ratios on nearby pairs."""
    x = space.sample(rng, n_pairs)
    v = rng.standard_normal(x.shape)
    v *= sep / np.linalg.norm(v, axis=-1, keepdims=True)
    y = x + v
    y = y - np.floor(y)
    d0 = space.distance(x, y)
    fwd = space.distance(space.iterate(x, 1), space.iterate(y, 1))
    bwd = space.distance(space.iterate(x, -1), space.iterate(y, -1))
    r = np.maximum(fwd, bwd) / d0
    return ExpansionEstimate(float(r.min()), float(np.median(r)), float(r.max()))


def instability_index(space, x, y, alpha: float, c: float, J: int = 40) -> np.ndarray:
    """``N(x, y)``: least ``N`` with ``d(e^j x, e^j y) > c alpha^{-|j|}`` for some ``|j| <= N``.

    Equal points give ``inf``.  Raises :class:`JExhausted` when a distinct
    pair shows no violation up to ``|j| = J``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    N = np.full(len(x), np.inf)
    same = space.distance(x, y) == 0
    open_ = ~same
    fx, fy, bx, by = x, y, x, y
    for j in range(J + 1):
        if not open_.any():
            break
        if j > 0:
            fx, fy = space.iterate(fx, 1), space.iterate(fy, 1)
            bx, by = space.iterate(bx, -1), space.iterate(by, -1)
        thr = c * alpha ** (-j)
        viol = (space.distance(fx, fy) > thr) | (space.distance(bx, by) > thr)
        hit = open_ & viol
        N[hit] = j
        open_ &= ~hit
    if open_.any():
        raise JExhausted(f"{int(open_.sum())} pairs show no violation within |j| <= {J}")
    return N


@dataclass
class MetricConstruction:
    """Finite-sample realization of ``N``, ``rho = alpha^{-N}``, the chain metric ``D`` and ``d_k``.

    Nodes are the orbit segments ``e^{jR} b_i`` for base points ``b_i`` and
    ``j = 0..levels-1``; node ``j * B + i`` is ``e^{jR} b_i``.
    """

    alpha: float
    alpha_eps: float
    c: float
    n: int
    nodes: np.ndarray
    B: int
    levels: int
    N: np.ndarray
    rho: np.ndarray
    D: np.ndarray
    base: np.ndarray  # base distances between nodes
    expansion: ExpansionEstimate | None = None

    def node(self, level: int, i):
        return level * self.B + np.asarray(i)

    def base_pairs(self):
        return np.triu_indices(self.B, 1)

    def L_D(self, j: int = 1) -> float:
        """``max D(e^j x, e^j y) / D(x, y)`` over base pairs."""
        i, k = self.base_pairs()
        num = self.D[self.node(j, i), self.node(j, k)]
        den = self.D[self.node(0, i), self.node(0, k)]
        return float(np.max(num / den))

    def SL_D(self, j: int = 1, quantile: float = 0.1) -> float:
        i, k = self.base_pairs()
        num = self.D[self.node(j, i), self.node(j, k)]
        den = self.D[self.node(0, i), self.node(0, k)]
        loc = den <= np.quantile(den, quantile)
        return float(np.min(num[loc] / den[loc]))

    def d_k(self, k: int, shift: int = 0) -> np.ndarray:
        """``d_k`` on base pairs (upper triangle), evaluated at orbit level ``shift``."""
        if k - 1 + shift > self.levels - 1:
            raise ValueError("not enough orbit levels for this k and shift")
        L1 = self.L_D(1)
        i, m = self.base_pairs()
        vals = [self.D[self.node(j + shift, i), self.node(j + shift, m)] / L1 ** (j / self.n)
                for j in range(k)]
        return np.max(vals, axis=0)

    def ln_L_dk(self, k: int) -> float:
        """``ln L_{d_k}(e^R)`` from the time-one ratio of ``d_k`` on base pairs."""
        return float(np.log(np.max(self.d_k(k, 1) / self.d_k(k, 0))))

    def metric_class(self) -> DistortedMetric:
        """Declared comparability of ``D``: ``d/(4c) <= D <= (d/c)^s`` for ``d <= c``."""
        s = math.log(self.alpha) / math.log(self.alpha * self.alpha_eps)
        D = self.D
        return DistortedMetric(lambda a, b: D[a, b], s=s, minus=True, c_lo=1.0 / (4 * self.c),
                               c_hi=self.c ** (-s), label="chain", valid_below=self.c)


def build_metric_construction(space, alpha: float | None = None, alpha_eps: float | None = None,
                              c: float = 0.2, B: int = 150, levels: int = 5, n: int = 3,
                              J: int = 40, seed: int = 0) -> MetricConstruction:
    """Build ``N``, ``rho`` and the chain metric ``D`` on an orbit-segment sample graph.

    ``alpha`` and ``alpha_eps`` default to the minimum and maximum observed
    one-step expansion on nearby pairs (a lower and an upper instability
    constant).  ``D`` is the shortest-path (chain) infimum of ``rho`` over the
    complete sample graph.
    """
    rng = np.random.default_rng(seed)
    if not hasattr(space, "iterate"):
        space = section_map(space)
    exp = None
    if alpha is None or alpha_eps is None:
        exp = estimate_expansion(space, rng)
        alpha = exp.alpha_min if alpha is None else alpha
        alpha_eps = exp.alpha_max * (1 + 1e-6) if alpha_eps is None else alpha_eps
    if not (alpha > 1 and alpha_eps > alpha):
        raise ValueError("need alpha_eps > alpha > 1")
    base = space.sample(rng, B)
    nodes = np.concatenate([space.iterate(base, j) for j in range(levels)])
    V = len(nodes)
    I, K = np.triu_indices(V, 1)
    N = np.full((V, V), np.inf)
    N[I, K] = instability_index(space, nodes[I], nodes[K], alpha, c, J)
    N[K, I] = N[I, K]
    rho = np.where(np.isinf(N), 0.0, alpha ** (-np.where(np.isinf(N), 0.0, N)))
    np.fill_diagonal(rho, 0.0)
    D = shortest_path(rho, method="FW", directed=False)
    dist = np.zeros((V, V))
    dist[I, K] = space.distance(nodes[I], nodes[K])
    dist[K, I] = dist[I, K]
    return MetricConstruction(alpha, alpha_eps, c, n, nodes, B, levels, N, rho, D, dist, exp)


@dataclass
class ConstructionChecks:
    n_pairs: int
    n_triples: int
    N_lower_violations: int
    N_upper_violations: int
    weak_triangle_violations: int
    frink_lower_violations: int
    frink_upper_violations: int
    growth_violations: int
    max_rho_over_D: float

    @property
    def ok(self) -> bool:
        return (self.N_lower_violations + self.N_upper_violations + self.weak_triangle_violations
                + self.frink_lower_violations + self.frink_upper_violations
                + self.growth_violations) == 0

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d


def check_construction(mc: MetricConstruction, n_pairs: int = 10_000, n_triples: int = 10_000,
                       seed: int = 1, rtol: float = 1e-12) -> ConstructionChecks:
    """Check the ``N`` bounds, weak triangle inequality, ``D <= rho <= 4 D`` and ``D`` growth.

    The upper ``N`` bound is compared after rounding up, since ``N`` is an integer.
    """
    rng = np.random.default_rng(seed)
    V = len(mc.nodes)
    a = rng.integers(0, V, n_pairs)
    b = rng.integers(0, V, n_pairs)
    m = a != b
    a, b = a[m], b[m]
    d = mc.base[a, b]
    N = mc.N[a, b]
    fin = np.isfinite(N) & (d > 0)
    ratio = np.log(mc.c / d[fin])
    lo = np.maximum(0.0, ratio / math.log(mc.alpha * mc.alpha_eps))
    hi = np.ceil(np.maximum(0.0, ratio / math.log(mc.alpha)) - 1e-9)
    nlo = int(np.sum(N[fin] < lo - 1e-9))
    nhi = int(np.sum(N[fin] > hi + 1e-9))
    t = rng.integers(0, V, (n_triples, 3))
    wt = mc.rho[t[:, 0], t[:, 2]] > 2 * np.maximum(mc.rho[t[:, 0], t[:, 1]],
                                                    mc.rho[t[:, 1], t[:, 2]]) * (1 + rtol)
    rho = mc.rho[a, b]
    D = mc.D[a, b]
    flo = int(np.sum(D > rho * (1 + rtol)))
    fhi = int(np.sum(rho > 4 * D * (1 + rtol)))
    # growth: D(e^j x, e^j y) <= 4 alpha^j D(x, y) on base pairs
    i, k = mc.base_pairs()
    gv = 0
    for j in range(1, mc.levels):
        num = mc.D[mc.node(j, i), mc.node(j, k)]
        den = mc.D[mc.node(0, i), mc.node(0, k)]
        gv += int(np.sum(num > 4 * mc.alpha ** j * den * (1 + rtol)))
    pos = D > 0
    return ConstructionChecks(int(len(a)), n_triples, nlo, nhi, int(wt.sum()), flo, fhi, gv,
                              float(np.max(rho[pos] / D[pos])) if pos.any() else 0.0)


@dataclass
class EntropyInequalityReport:
    htop: float
    n: int
    k: int
    ln_L_dk: float
    lower_lhs: float
    lower_rhs: float
    upper_lhs: float
    upper_rhs: float
    slack: float
    lower_holds: bool
    upper_holds: bool
    family: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.lower_holds and self.upper_holds

    def to_dict(self):
        d = asdict(self)
        d["holds"] = self.holds
        return d


def verify_entropy_inequality(htop: float, ln_L: float, n: int = 3, k: int = 4,
                              slack: float = 1.25, family: dict | None = None
                              ) -> EntropyInequalityReport:
    """Check ``(n/2) ln L <= slack * htop`` and ``htop <= slack * n ln L``.

    Failures are reported in the returned record, never raised.
    """
    lower_lhs = 0.5 * n * ln_L
    lower_rhs = slack * htop
    upper_rhs = slack * n * ln_L
    tol = 1e-12
    return EntropyInequalityReport(
        htop, n, k, ln_L, lower_lhs, lower_rhs, htop, upper_rhs, slack,
        bool(lower_lhs <= lower_rhs + tol), bool(htop <= upper_rhs + tol), dict(family or {}),
    )


def entropy_inequality_for(mc: MetricConstruction, htop: float, k: int = 4,
                           slack: float = 1.25) -> EntropyInequalityReport:
    """Inequality report using ``ln L_{d_k}`` from a construction, with the ``d_j`` family for ``j <= k``."""
    fam = {j: mc.ln_L_dk(j) for j in range(1, k + 1)}
    return verify_entropy_inequality(htop, fam[k], mc.n, k, slack, fam)
