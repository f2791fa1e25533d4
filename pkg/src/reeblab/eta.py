"""Eta invariants of eigenvalue streams.

The heat representation ``eta = pi^{-1/2} int_0^inf t^{-1/2} tr(D e^{-t D^2}) dt``
is split at ``t = 1``.  The ``t >= 1`` part is ``sum sign(l) erfc(|l|)``; the
``t < 1`` part needs local information and is supplied by a provider.  For
arithmetic progressions the provider is exact (Poisson summation), and the
Hurwitz zeta continuation gives an independent closed form.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import erfc, erfcinv

from .spectral_model import EigenvalueStream


class DegenerateFamily(ValueError):
    """A remainder experiment needs at least three distinct ``h`` values."""


@dataclass
class EtaResult:
    value: float
    method: str
    cutoff: float | None = None
    tail_bound: float = 0.0
    small_t_omitted: bool = False
    parts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _fsum_sorted(v: np.ndarray) -> float:
    # deterministic order independent of the input layout
    return math.fsum(np.sort(np.asarray(v, dtype=float)).tolist())


def eta_erfc(stream: EigenvalueStream) -> EtaResult:
    """``sum_j sign(l_j) erfc(|l_j|)`` with ``sign(0) = 0``.

    ``tail_bound`` estimates what eigenvalues beyond the cutoff could add:
    ``rho e^{-L^2}`` with ``rho`` the mean density of the stream.
    """
    ev = stream.eigenvalues
    mult = stream.multiplicities
    terms = np.sign(ev) * erfc(np.abs(ev)) * mult
    L = float(stream.cutoff)
    rho = len(stream) / (2 * L) if L > 0 else 0.0
    return EtaResult(_fsum_sorted(terms), "erfc_tail", L, rho * math.exp(-L * L))


def eta_zeta_progression(a: float, cutoff: float | None = None) -> EtaResult:
    """``eta(0)`` of ``{n + a : n in Z}`` from ``zeta(s, a) - zeta(s, 1 - a)`` at ``s = 0``.

    Since ``zeta(0, a) = 1/2 - a`` the value is ``1 - 2a``.  When ``cutoff``
    is given the Hurwitz values at ``s = 0`` are also evaluated with mpmath
    and stored in ``parts``.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    value = 1.0 - 2.0 * a
    parts = {}
    if cutoff is not None:
        parts["mpmath"] = float(mpmath.zeta(0, a) - mpmath.zeta(0, 1 - a))
    return EtaResult(value, "zeta_hurwitz", cutoff, 0.0, False, parts)


@dataclass
class HurwitzCheck:
    partial: float
    exact: float
    tail_bound: float
    ok: bool


def hurwitz_crosscheck(a: float, cutoff: float, s: float = 2.0) -> HurwitzCheck:
    """Direct partial sum of ``sign(l)|l|^{-s}`` over ``|n + a| <= cutoff`` vs Hurwitz zeta."""
    if not 0.0 < a < 1.0 or s <= 1:
        raise ValueError("need a in (0, 1) and s > 1")
    ev = progression_values(a, cutoff)
    partial = _fsum_sorted(np.sign(ev) * np.abs(ev) ** (-s))
    exact = float(mpmath.zeta(s, a) - mpmath.zeta(s, 1 - a))
    # each one-sided tail is below int_{cutoff-1}^inf x^{-s} dx
    tail = 2.0 * (cutoff - 1.0) ** (1 - s) / (s - 1)
    return HurwitzCheck(partial, exact, tail, abs(partial - exact) <= tail)


def progression_values(a: float, cutoff: float) -> np.ndarray:
    lo = int(math.ceil(-cutoff - a - 1e-12))
    hi = int(math.floor(cutoff - a + 1e-12))
    return np.arange(lo, hi + 1) + a


class ProgressionSmallT:
    """Exact ``t < 1`` heat contribution for ``{c (n + a)}``.

    Poisson summation gives ``(2/pi) sum_{k>=1} sin(2 pi k a) e^{-pi^2 k^2 / c^2} / k``.
    ``a`` and ``c`` are read off the stream unless given, so the provider
    transforms covariantly under scaling and negation.
    """

    def __init__(self, a: float | None = None, scale: float | None = None, kmax: int = 200):
        self.a = a
        self.scale = scale
        self.kmax = kmax

    def parameters(self, stream: EigenvalueStream) -> tuple[float, float]:
        ev = stream.eigenvalues
        if ev.size < 3 or np.any(stream.multiplicities != 1):
            raise ValueError("not an arithmetic progression")
        gaps = np.diff(ev)
        c = float(np.median(gaps)) if self.scale is None else float(self.scale)
        if np.max(np.abs(gaps - c)) > 1e-9 * max(1.0, c):
            raise ValueError("not an arithmetic progression")
        if self.a is None:
            pos = ev[ev > 0]
            a = float(pos[0] / c) % 1.0 if pos.size else 0.0
            a = 0.0 if min(a, 1 - a) < 1e-12 else a
        else:
            a = float(self.a)
        return a, c

    def __call__(self, stream: EigenvalueStream) -> float:
        a, c = self.parameters(stream)
        k = np.arange(1, self.kmax + 1)
        terms = np.sin(2 * np.pi * k * a) * np.exp(-(np.pi * k / c) ** 2) / k
        return 2.0 / math.pi * math.fsum(terms.tolist())


def eta_full_from_stream(stream: EigenvalueStream,
                         heat_small_t: Callable[[EigenvalueStream], float] | None = None
                         ) -> EtaResult:
    """Erfc tail plus the small-time term when a provider is given."""
    tail = eta_erfc(stream)
    if heat_small_t is None:
        return EtaResult(tail.value, "split", tail.cutoff, tail.tail_bound, True,
                         {"erfc_tail": tail.value})
    small = float(heat_small_t(stream))
    return EtaResult(tail.value + small, "split", tail.cutoff, tail.tail_bound, False,
                     {"erfc_tail": tail.value, "small_t": small})


def reduced_eta(stream: EigenvalueStream, eta: EtaResult | None = None) -> float:
    """``(dim ker + eta) / 2``; zero modes never enter ``eta`` itself."""
    if eta is None:
        eta = eta_erfc(stream)
    return 0.5 * (stream.kernel_dim() + eta.value)


# ---------------------------------------------------------------------------
# Remainder scaling experiments
# ---------------------------------------------------------------------------


def planted_family(remainder: Callable[[float], float], lead: float = 0.0, m: int = 1,
                   bulk: float = 20.0, plateau_times: Sequence[float] = (2.0, 5.0)
                   ) -> Callable[[float], EigenvalueStream]:
    """Synthetic streams with ``h^m eta_erfc = lead + remainder(h)``.

    Each stream has a symmetric bulk of density ``h^{-m}`` on ``[-bulk, bulk]``
    whose counting function is flat on windows ``|l - t| < 1/2`` around each
    plateau time ``t`` (gaps in the bulk), plus ``K`` eigenvalues at one
    positive value ``l*`` with ``K erfc(l*) = h^{-m}(lead + remainder(h))``
    (sign flipped when negative).  The bulk cancels in ``eta``, so the
    asymmetric block carries the whole planted value.
    """

    def build(h: float) -> EigenvalueStream:
        rho = h ** (-m)
        n = int(round(rho * bulk))
        grid = (np.arange(n) + 0.5) / rho
        for t in plateau_times:
            grid = grid[np.abs(grid - t) >= 0.5]
        target = rho * (lead + remainder(h))
        parts = [grid, -grid]
        mult = [np.ones(grid.size, np.int64)] * 2
        if target != 0.0:
            K = int(math.floor(abs(target))) + 1  # keeps l* > 0
            lam = float(erfcinv(abs(target) / K))
            parts.append(np.array([math.copysign(lam, target)]))
            mult.append(np.array([K], np.int64))
        ev = np.concatenate(parts)
        mu = np.concatenate(mult)
        cut = max(bulk, float(np.max(np.abs(ev))) if ev.size else bulk)
        return EigenvalueStream(ev, mu, cut, f"planted(h={h})")

    return build


@dataclass
class RemainderReport:
    mode: str
    exponent: float | None
    target_exponent: float | None
    constant: float
    residual_power: float | None
    residual_log: float | None
    preferred: str | None
    points: list

    def to_dict(self) -> dict:
        return asdict(self)


def remainder_experiment(family: Callable[[float], EigenvalueStream], hs: Sequence[float],
                         m: int = 1, lead: float = 0.0, nu: float | None = None,
                         mode: str = "power",
                         eta: Callable[[EigenvalueStream], EtaResult] = eta_erfc
                         ) -> RemainderReport:
    """Fit ``R(h) = h^m eta_h - lead`` against ``h^{1/(2 nu - 1)}`` or ``1/|ln h|``.

    ``constant`` is the least-squares ``C`` in ``|R| ~ C g(h)`` for the
    model ``g`` selected by ``mode``.  When every ``R`` is nonzero the
    power-law exponent is fitted in log-log space, and both models are
    compared by RMS residual of ``log|R|`` (the reciprocal-log model has a
    free constant only).
    """
    if mode not in ("power", "log"):
        raise ValueError("mode must be 'power' or 'log'")
    hs = np.asarray(sorted(set(float(h) for h in hs)))
    if hs.size < 3 or np.any(hs <= 0) or np.any(hs >= 1):
        raise DegenerateFamily("need at least three distinct h in (0, 1)")
    R = np.array([h ** m * eta(family(h)).value - lead for h in hs])
    absR = np.abs(R)
    if mode == "power":
        if nu is None or nu <= 1:
            raise ValueError("power mode needs nu > 1")
        target = 1.0 / (2 * nu - 1)
        g = hs ** target
    else:
        target = None
        g = 1.0 / np.abs(np.log(hs))
    C = float(np.dot(g, absR) / np.dot(g, g))
    exponent = res_pow = res_log = preferred = None
    if np.all(absR > 0):
        X = np.log(hs)
        Y = np.log(absR)
        slope, icpt = np.polyfit(X, Y, 1)
        exponent = float(slope)
        res_pow = float(np.sqrt(np.mean((Y - (icpt + slope * X)) ** 2)))
        Z = -np.log(np.abs(np.log(hs)))
        b = float(np.mean(Y - Z))
        res_log = float(np.sqrt(np.mean((Y - Z - b) ** 2)))
        preferred = "log" if res_log < res_pow else "power"
    pts = [[float(h), float(r)] for h, r in zip(hs, R)]
    return RemainderReport(mode, exponent, target, C, res_pow, res_log, preferred, pts)
