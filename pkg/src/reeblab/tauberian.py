"""Smoothing kernels with compact Fourier support, the half-line mollifier,
smoothed spectral counting, and local Weyl counting.

Conventions
-----------
``theta(x) = int e^{i x xi} theta_check(xi) d xi``.  Eigenvalue streams are
spectra of the rescaled operator ``D / sqrt(h)``.  All powers of ``h`` pass
through the small helpers at the top of this module.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import BSpline, PPoly

from .spectral_model import EigenvalueStream

# ---------------------------------------------------------------------------
# h-scaling bookkeeping
# ---------------------------------------------------------------------------


def effective_bandwidth(T: float, h: float) -> float:
    """Smoothing bandwidth in rescaled units: ``T / sqrt(h)``."""
    return T / math.sqrt(h)


def rescaled_density(u0: float, h: float, m: int, vol: float = 1.0) -> float:
    """Eigenvalue density of ``D / sqrt(h)`` near 0: ``h^{-m-1/2} u0 vol`` (``h^{-n/2}``, ``n = 2m+1``)."""
    return h ** (-m - 0.5) * u0 * vol


def weyl_window(T: float, h: float) -> float:
    """Right end of the counting window ``(0, sqrt(h)/T)`` for ``D / sqrt(h)``."""
    return math.sqrt(h) / T


def weyl_leading_bound(u0: float, h: float, m: int, T: float, vol: float = 1.0,
                       f0: float = 1.0) -> float:
    """Leading local Weyl bound ``h^{-m} T^{-1} f(0) u0 vol``."""
    return h ** (-m) * f0 * u0 * vol / T


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass
class SmoothingKernel:
    """A pair ``(theta, theta_check)`` with ``theta_check`` supported in ``[lo, hi]``.

    ``cdf`` is ``int_{-inf}^x theta_check`` and ``first_moment_cdf`` is
    ``int_{-inf}^x |u| theta_check(u) du``; both are exact piecewise polynomials.
    """

    name: str
    theta: Callable
    theta_check: Callable
    cdf: Callable
    first_moment_cdf: Callable
    support: tuple
    breakpoints: np.ndarray
    peak: float

    def theta2(self, y):
        """Upper tail ``int_{u >= y} theta_check(u) du``."""
        return 1.0 - self.cdf(y)

    def theta1(self, y):
        return self.first_moment_cdf(y)


def _bspline_element(p: int, lo: float, hi: float, scale: float = 1.0) -> BSpline:
    """Order-``p`` B-spline basis element on equally spaced knots in ``[lo, hi]``, times ``scale``."""
    b = BSpline.basis_element(np.linspace(lo, hi, p + 1), extrapolate=False)
    return BSpline(b.t, b.c * scale, b.k, extrapolate=False)


def _ppoly_times_u(pp: PPoly) -> PPoly:
    """Multiply a piecewise polynomial by the identity ``u``."""
    c = pp.c
    x0 = pp.x[:-1]
    k = c.shape[0]
    out = np.zeros((k + 1, c.shape[1]))
    out[:k] += c            # v * P(v): degrees shift up
    out[1:] += c * x0       # x_i * P(v)
    return PPoly(out, pp.x, extrapolate=False)


def make_kernel(kind: str = "bspline", p: int = 2, delta: float = 0.1) -> SmoothingKernel:
    """Build a smoothing kernel.

    ``kind="bspline"``
        ``theta_check`` is the order-``p`` centred B-spline rescaled to
        ``[-1, 1]`` with unit mass; ``theta(x) = (sin(x/p) / (x/p))^p``.
    ``kind="weyl"``
        ``theta_check = (1_{[-delta/2, 1+delta/2]} * b) / (1 + delta)`` with
        ``b`` the order-``p`` B-spline of width ``delta``: unit mass and
        ``theta_check = 1/(1+delta)`` on ``[0, 1]``.  ``theta`` is complex.
    """
    if p < 2:
        raise ValueError("B-spline order p must be >= 2")
    if kind == "bspline":
        pp = PPoly.from_spline(_bspline_element(p, -1.0, 1.0, p / 2.0), extrapolate=False)
        lo, hi = -1.0, 1.0

        def theta(x):
            x = np.asarray(x, dtype=float)
            return np.sinc(x / (np.pi * p)) ** p

        name = f"bspline{p}"
    elif kind == "weyl":
        if not delta > 0:
            raise ValueError("delta must be positive")
        lo, hi = -delta, 1.0 + delta
        # the smoothed indicator is itself a B-spline-type piecewise polynomial;
        # build it as a difference of antiderivatives of the bump
        bump = _bspline_element(p, -delta / 2, delta / 2, p / delta)
        B = bump.antiderivative()
        xs = np.unique(np.concatenate([np.linspace(-delta / 2, delta / 2, p + 1) - delta / 2,
                                       np.linspace(-delta / 2, delta / 2, p + 1) + 1 + delta / 2]))
        xs = np.unique(np.concatenate([xs, [lo, hi]]))
        # sample exactly on a fine Chebyshev set per interval and refit degree-p pieces
        deg = p
        coeffs = np.zeros((deg + 1, len(xs) - 1))

        def g(u):
            u = np.asarray(u, dtype=float)
            a = np.nan_to_num(B(np.clip(u + delta / 2, -delta / 2, delta / 2)))
            b = np.nan_to_num(B(np.clip(u - 1 - delta / 2, -delta / 2, delta / 2)))
            return (a - b) / (1.0 + delta)

        for i in range(len(xs) - 1):
            a_, b_ = xs[i], xs[i + 1]
            nodes = a_ + (b_ - a_) * (0.5 - 0.5 * np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1)))
            V = np.vander(nodes - a_, deg + 1)
            coeffs[:, i] = np.linalg.solve(V, g(nodes))
        pp = PPoly(coeffs, xs, extrapolate=False)
        bhat = lambda w: np.sinc(w * delta / (2 * np.pi * p)) ** p

        def theta(x):
            x = np.asarray(x, dtype=float)
            w = 1.0 + delta
            box = np.exp(1j * x * 0.5) * np.sinc(x * w / (2 * np.pi))
            return box * bhat(x)

        name = f"weyl{p}"
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")

    def theta_check(x):
        x = np.asarray(x, dtype=float)
        v = np.nan_to_num(pp(x))
        return np.where((x >= lo) & (x <= hi), v, 0.0)

    anti = pp.antiderivative()
    A_lo, A_hi = float(anti(lo)), float(anti(hi))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        v = (anti(np.clip(x, lo, hi)) - A_lo) / (A_hi - A_lo)
        return np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, v))

    # int_{lo}^{y} |u| theta_check(u) du from the antiderivative G of u * theta_check
    G = _ppoly_times_u(pp).antiderivative()
    G_lo = float(G(lo))
    G_0 = float(G(min(max(0.0, lo), hi)))

    def first_moment_cdf(y):
        y = np.asarray(y, dtype=float)
        g = G(np.clip(y, lo, hi))
        val = np.where(np.clip(y, lo, hi) <= 0, -(g - G_lo), -(G_0 - G_lo) + (g - G_0))
        return np.where(y <= lo, 0.0, val)

    grid = np.linspace(lo, hi, 4001)
    peak = float(np.max(theta_check(grid)))
    kern = SmoothingKernel(name, theta, theta_check, cdf, first_moment_cdf, (lo, hi),
                           np.asarray(pp.x), peak)
    return kern


# ---------------------------------------------------------------------------
# Mollifier
# ---------------------------------------------------------------------------


class Mollifier:
    """``phi(x) = int_{-inf}^{-x} theta_check - 1_{x <= 0}``, with ``phi(0) := 0``.

    For an even kernel ``phi(x) = int_x^inf theta_check`` for ``x > 0`` and
    ``phi(-x) = -phi(x)``; it is evaluated through that identity so oddness
    holds exactly.  Its derivative off 0 is ``-theta_check(-x)``.
    """

    def __init__(self, kernel: SmoothingKernel, scale: float = 1.0):
        lo, hi = kernel.support
        if not (lo == -hi and np.allclose(kernel.theta_check(np.linspace(0, hi, 9)),
                                          kernel.theta_check(-np.linspace(0, hi, 9)))):
            raise ValueError("the mollifier needs an even kernel")
        self.kernel = kernel
        self.scale = float(scale)

    def __call__(self, x):
        x = np.asarray(x, dtype=float) / self.scale
        ax = np.abs(x)
        tail = 1.0 - self.kernel.cdf(ax)
        return np.sign(x) * tail

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -self.kernel.theta_check(-x / self.scale) / self.scale

    def smoothed(self, x: float, T: float, epsabs: float = 1e-13) -> float:
        """``(phi * theta_check_T)(x) = int phi(x - y/T) theta_check(y) dy``."""
        lo, hi = self.kernel.support
        pts = [p for p in list(self.kernel.breakpoints) + [x * T / self.scale] if lo < p < hi]
        val, _ = quad(lambda y: float(self(x - y / T)) * float(self.kernel.theta_check(y)),
                      lo, hi, points=sorted(set(pts)) or None, limit=400,
                      epsabs=epsabs, epsrel=1e-13)
        return val


@dataclass
class MollifierBoundReport:
    x: np.ndarray
    T: float
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    tol: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs + self.tol))

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slack))


def mollifier_bound_check(kernel: SmoothingKernel, T: float, x_grid, tol: float = 1e-8
                          ) -> MollifierBoundReport:
    """Compare ``|phi - phi * theta_check_T|(x)`` with ``T^{-1} theta_1(|x| T) + 2 theta_2(|x| T)``."""
    phi = Mollifier(kernel)
    x = np.asarray(x_grid, dtype=float)
    if np.any(x == 0):
        raise ValueError("x_grid must avoid 0")
    lhs = np.array([abs(float(phi(xi)) - phi.smoothed(float(xi), T)) for xi in x])
    y = np.abs(x) * T
    rhs = kernel.theta1(y) / T + 2.0 * kernel.theta2(y)
    return MollifierBoundReport(x, T, lhs, rhs, rhs - lhs, tol)


# ---------------------------------------------------------------------------
# Spectral counting
# ---------------------------------------------------------------------------


def _pairwise_sum(v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0]) if v.size else 0.0


def smoothed_counting(stream: EigenvalueStream, kernel: SmoothingKernel, T: float, lam: float,
                      h: float = 1.0, f: Callable | None = None) -> float:
    """``sum_j f(l_j) T_h theta_check(T_h (lam - l_j))`` with ``T_h = T / sqrt(h)``.

    For a stream of density ``rho`` and large ``T`` this approaches ``rho f(lam)``.
    """
    ev = stream.expanded()
    if ev.size == 0:
        return 0.0
    Th = effective_bandwidth(T, h)
    w = Th * kernel.theta_check(Th * (lam - ev))
    if f is not None:
        w = w * np.asarray(f(ev), dtype=float)
    return _pairwise_sum(np.sort(w))


@dataclass
class LocalWeylReport:
    count: int
    bound: float
    expected: float
    window: tuple
    holds: bool
    slack: float

    def to_dict(self):
        return asdict(self)


def local_weyl_check(stream: EigenvalueStream, T: float, h: float, m: int, u0_at_0: float,
                     vol_like: float = 1.0, slack: float = 0.0, f0: float = 1.0) -> LocalWeylReport:
    """Count eigenvalues of ``D / sqrt(h)`` in ``(0, sqrt(h)/T)`` against ``h^{-m} T^{-1} u0 vol``."""
    ev = stream.expanded()
    right = weyl_window(T, h)
    count = int(np.count_nonzero((ev > 0) & (ev < right)))
    lead = weyl_leading_bound(u0_at_0, h, m, T, vol_like, f0)
    bound = lead * (1.0 + slack)
    return LocalWeylReport(count, bound, lead, (0.0, right), bool(count <= bound + 1), bound - count)
