"""Model spectral data for the constant-field magnetic Dirac operator.

Thresholds ``sqrt(2 Lambda)`` with ``Lambda`` in the nonzero part of the
lattice ``mu . N_0^m``, the elementary distributions ``s^a`` and
``d_s^a [|s| s^b (s^2 - 2 Lambda)^{c - 1/2} H(s^2 - 2 Lambda)]`` paired with
test functions, the leading density ``u0`` on the spectral gap, and
deterministic eigenvalue streams.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import eval_hermitenorm

from .io import validate


class OutsideGap(ValueError):
    pass


class CombinatorialBudget(RuntimeError):
    pass


class EmptyStream(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    mu: tuple

    def __post_init__(self):
        mu = tuple(float(v) for v in self.mu)
        if not mu or any(not v > 0 for v in mu):
            raise ValueError("all mu_j must be positive")
        object.__setattr__(self, "mu", tuple(sorted(mu)))

    @property
    def m(self) -> int:
        return len(self.mu)

    @property
    def n(self) -> int:
        return 2 * self.m + 1

    @property
    def det(self) -> float:
        return float(np.prod(self.mu))

    @property
    def gap(self) -> float:
        """Half-width ``sqrt(2 mu_1)`` of the spectral gap."""
        return math.sqrt(2.0 * self.mu[0])


@dataclass
class ThresholdLattice:
    Lambdas: np.ndarray
    values: np.ndarray
    multiplicities: np.ndarray
    enumerated: int


def thresholds(params: ModelParams, Lambda_cut: float, merge_tol: float = 1e-12,
               budget: int = 10_000_000) -> ThresholdLattice:
    """Enumerate ``Lambda = sum k_j mu_j <= Lambda_cut`` over nonzero multi-indices."""
    mu = params.mu
    if not Lambda_cut > mu[0]:
        raise ValueError("Lambda_cut must exceed mu_1")
    bounds = [int(math.floor(Lambda_cut / v + 1e-12)) for v in mu]
    size = float(np.prod([b + 1 for b in bounds]))
    if size > budget:
        raise CombinatorialBudget(f"{size:.3g} multi-indices exceed budget {budget}")
    vals = []
    for k in itertools.product(*[range(b + 1) for b in bounds]):
        if not any(k):
            continue
        L = math.fsum(kj * mj for kj, mj in zip(k, mu))
        if L <= Lambda_cut * (1 + 1e-14):
            vals.append(L)
    vals.sort()
    Ls, mult = [], []
    for v in vals:
        if Ls and abs(v - Ls[-1]) <= merge_tol * max(1.0, abs(v)):
            mult[-1] += 1
        else:
            Ls.append(v)
            mult.append(1)
    Ls = np.array(Ls)
    return ThresholdLattice(Ls, np.sqrt(2.0 * Ls), np.array(mult, dtype=int), len(vals))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


class TestFunction:
    """A test function with access to its derivatives.

    ``derivs(k)`` returns a callable for the ``k``-th derivative.  Plain
    callables are accepted by :func:`as_test_function`, which falls back to
    high-order finite differences.
    """

    __test__ = False  # not a pytest class

    def __init__(self, derivs: Callable[[int], Callable], support=(-np.inf, np.inf), label=""):
        self._derivs = derivs
        self.support = support
        self.label = label

    def __call__(self, s):
        return self._derivs(0)(s)

    def derivative(self, k: int = 1) -> "TestFunction":
        return TestFunction(lambda j: self._derivs(j + k), self.support, f"{self.label}'" * k)

    def d(self, k: int) -> Callable:
        return self._derivs(k)


def gaussian(center: float = 0.0, width: float = 1.0, amp: float = 1.0,
             normalized: bool = False) -> TestFunction:
    """``amp * exp(-(s - center)^2 / (2 width^2))`` (unit mass if ``normalized``)."""
    if normalized:
        amp = 1.0 / (width * math.sqrt(2 * math.pi))

    def derivs(k):
        def f(s):
            z = (np.asarray(s, dtype=float) - center) / width
            return amp * (-1) ** k * eval_hermitenorm(k, z) * np.exp(-0.5 * z * z) / width ** k
        return f

    return TestFunction(derivs, label=f"gauss({center},{width})")


def odd_gaussian(width: float = 1.0) -> TestFunction:
    """``s exp(-s^2 / (2 width^2))``, an odd test function."""
    # s e^{-s^2/2w^2} = -w^2 d/ds e^{-s^2/2w^2}
    g = gaussian(0.0, width)
    return TestFunction(lambda k: (lambda s: -width ** 2 * g.d(k + 1)(s)), label="odd-gauss")


def bump(radius: float, center: float = 0.0) -> TestFunction:
    """Smooth bump ``exp(-1/(1 - r^2))`` supported in ``(center - radius, center + radius)``."""

    def f0(s):
        r = (np.asarray(s, dtype=float) - center) / radius
        out = np.zeros_like(r)
        m = np.abs(r) < 1
        out[m] = np.exp(-1.0 / (1.0 - r[m] ** 2))
        return out

    def derivs(k):
        if k == 0:
            return f0
        return lambda s: _fd(f0, np.asarray(s, dtype=float), k, 1e-3 * radius)

    return TestFunction(derivs, (center - radius, center + radius), "bump")


def _fd(f, s, k, h):
    """Central finite difference of order ``k`` (8th-order accurate for k <= 2, else Richardson-free)."""
    if k == 1:
        c = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    elif k == 2:
        c = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
    else:
        return _fd(lambda x: _fd(f, x, k - 2, h), s, 2, h)
    offs = np.arange(-4, 5)
    return sum(ci * f(s + o * h) for ci, o in zip(c, offs)) / h ** k


def as_test_function(phi) -> TestFunction:
    if isinstance(phi, TestFunction):
        return phi
    return TestFunction(lambda k: phi if k == 0 else (lambda s: _fd(phi, np.asarray(s, float), k, 1e-3)))


# ---------------------------------------------------------------------------
# Elementary distributions
# ---------------------------------------------------------------------------

QUAD_TOL = 1e-12


def eval_v_poly(a: int, phi) -> float:
    """``int s^a phi(s) ds``."""
    phi = as_test_function(phi)
    lo, hi = phi.support
    val, err = quad(lambda s: s ** a * float(phi(s)), lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL,
                    limit=400)
    if not np.isfinite(val):
        raise ArithmeticError("quadrature did not converge")
    return val


def eval_v_threshold(a: int, b: int, c: int, Lam: float, phi) -> float:
    """Pair ``d_s^a [|s| s^b (s^2 - 2 Lam)^{c-1/2} H(s^2 - 2 Lam)]`` with ``phi``.

    The derivatives are moved onto ``phi`` (sign ``(-1)^a``) and the
    substitution ``s = +-sqrt(2 Lam + u^2)`` turns the pairing into
    ``int_0^inf u^{2c} [s^b phi^{(a)}(s) + (-s)^b phi^{(a)}(-s)] du``, free of
    endpoint singularities.
    """
    if c < 0:
        raise ValueError("c must be a nonnegative integer")
    if a < 0 or not Lam > 0:
        raise ValueError("need a >= 0 and Lam > 0")
    phi = as_test_function(phi)
    da = phi.d(a)
    s0 = math.sqrt(2.0 * Lam)
    lo, hi = phi.support
    if -s0 <= lo and hi <= s0:
        return 0.0
    # integrand vanishes once both +-s leave the support
    umax = np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        R = max(abs(lo), abs(hi))
        umax = math.sqrt(max(R * R - 2 * Lam, 0.0))

    def g(u):
        s = math.sqrt(2.0 * Lam + u * u)
        return u ** (2 * c) * (s ** b * float(da(s)) + (-s) ** b * float(da(-s)))

    val, err = quad(g, 0.0, umax, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    if not np.isfinite(val):
        raise ArithmeticError("quadrature did not converge")
    return (-1) ** a * val


def u0_density(params: ModelParams, lam) -> np.ndarray:
    """Leading density on the gap ``|lam| < sqrt(2 mu_1)``.

    ``u0(0) = det / (4 pi)^{n/2}``; on the gap the density comes from the
    lowest Landau branch alone, whose spectral density is flat, so the
    profile is the constant ``u0(0)`` (even by construction).
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam) >= params.gap):
        raise OutsideGap(f"|lambda| must be < sqrt(2 mu_1) = {params.gap}")
    val = params.det / (4.0 * math.pi) ** (params.n / 2.0)
    return np.full(lam.shape, val) if lam.ndim else val


def landau_box_spectrum(params: ModelParams, L: float, flux: Sequence[int],
                        cutoff: float) -> np.ndarray:
    """Enumerated spectrum of the model operator on a periodic box.

    The box has ``flux[j]`` flux quanta through each magnetic plane and
    length ``L`` along the field-free direction, whose momenta are
    ``xi = 2 pi k / L``.  Eigenvalues are ``xi`` on the lowest branch and
    ``+-sqrt(xi^2 + 2 Lambda)`` on excited ones, each with the Landau
    degeneracy ``prod flux`` times the threshold multiplicity.  Used as an
    independent oracle for the gap profile.
    """
    deg = int(np.prod(flux))
    kmax = int(math.ceil(cutoff * L / (2 * math.pi)))
    xi = 2 * math.pi * np.arange(-kmax, kmax + 1) / L
    parts = [np.repeat(xi, deg)]
    if cutoff ** 2 > 2 * params.mu[0]:
        th = thresholds(params, cutoff ** 2 / 2.0)
        for Lam, mult in zip(th.Lambdas, th.multiplicities):
            e = np.sqrt(xi ** 2 + 2 * Lam)
            parts += [np.repeat(e, deg * mult), np.repeat(-e, deg * mult)]
    ev = np.concatenate(parts)
    return np.sort(ev[np.abs(ev) <= cutoff])


# ---------------------------------------------------------------------------
# Eigenvalue streams
# ---------------------------------------------------------------------------

STREAM_SCHEMA = {
    "type": "object",
    "required": ["eigenvalues", "cutoff"],
    "properties": {
        "eigenvalues": {"type": "array", "items": {"type": "number"}},
        "multiplicities": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "cutoff": {"type": "number", "exclusiveMinimum": 0},
        "label": {"type": "string"},
    },
}


@dataclass
class EigenvalueStream:
    """Sorted distinct eigenvalues with multiplicities and a symmetric cutoff."""

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    cutoff: float
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        mult = (np.ones(len(ev), dtype=np.int64) if self.multiplicities is None
                else np.asarray(self.multiplicities, dtype=np.int64))
        if ev.shape != mult.shape:
            raise ValueError("eigenvalues and multiplicities differ in length")
        if np.any(mult < 1):
            raise ValueError("multiplicities must be >= 1")
        if np.any(np.abs(ev) > self.cutoff * (1 + 1e-12)):
            raise ValueError("eigenvalue beyond the declared cutoff")
        order = np.argsort(ev, kind="stable")
        ev, mult = ev[order], mult[order]
        # merge exact duplicates
        if ev.size:
            keep = np.concatenate(([True], np.diff(ev) != 0))
            idx = np.cumsum(keep) - 1
            mult = np.bincount(idx, weights=mult).astype(np.int64)
            ev = ev[keep]
        self.eigenvalues, self.multiplicities = ev, mult

    @classmethod
    def from_values(cls, values, cutoff: float | None = None, label: str = "") -> "EigenvalueStream":
        v = np.asarray(values, dtype=float)
        if cutoff is None:
            cutoff = float(np.max(np.abs(v))) if v.size else 1.0
        return cls(v, None, cutoff, label)

    def expanded(self) -> np.ndarray:
        return np.repeat(self.eigenvalues, self.multiplicities)

    def __len__(self):
        return int(self.multiplicities.sum())

    def negate(self) -> "EigenvalueStream":
        return EigenvalueStream(-self.eigenvalues, self.multiplicities.copy(), self.cutoff,
                                f"-({self.label})", dict(self.meta))

    def scale(self, c: float) -> "EigenvalueStream":
        if not c > 0:
            raise ValueError("scale must be positive")
        meta = dict(self.meta)
        if "scale" in meta:
            meta["scale"] = meta["scale"] * c
        return EigenvalueStream(c * self.eigenvalues, self.multiplicities.copy(), c * self.cutoff,
                                f"{c}*({self.label})", meta)

    def kernel_dim(self) -> int:
        return int(self.multiplicities[self.eigenvalues == 0].sum())

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "multiplicities": self.multiplicities.tolist(),
            "cutoff": self.cutoff,
            "label": self.label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EigenvalueStream":
        validate(d, STREAM_SCHEMA)
        return cls(np.array(d["eigenvalues"], dtype=float), d.get("multiplicities"),
                   float(d["cutoff"]), d.get("label", ""))

    @classmethod
    def from_json(cls, text: str) -> "EigenvalueStream":
        return cls.from_dict(json.loads(text))


def progression_stream(a: float, cutoff: float, scale: float = 1.0) -> EigenvalueStream:
    """``{scale (n + a) : n in Z, |n + a| <= cutoff}``."""
    lo = int(math.ceil(-cutoff - a - 1e-12))
    hi = int(math.floor(cutoff - a + 1e-12))
    n = np.arange(lo, hi + 1)
    ev = scale * (n + a)
    s = EigenvalueStream(ev, None, scale * cutoff, f"progression(a={a},scale={scale})")
    s.meta.update(kind="progression", a=float(a), scale=float(scale))
    return s


def quantile_stream(density: Callable | None, support: tuple, N: int, cutoff: float | None = None,
                    label: str = "") -> EigenvalueStream:
    """Place the ``j``-th eigenvalue at the ``(j - 1/2)/N`` quantile of a density on ``support``.

    ``density=None`` means uniform.
    """
    lo, hi = map(float, support)
    if N < 1:
        raise EmptyStream("N must be >= 1")
    q = (np.arange(N) + 0.5) / N
    if density is None:
        ev = lo + (hi - lo) * q
    else:
        xs = np.linspace(lo, hi, 20001)
        pdf = np.maximum(np.asarray(density(xs), dtype=float), 0.0)
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(xs))))
        if cdf[-1] <= 0:
            raise EmptyStream("density has zero mass")
        ev = np.interp(q, cdf / cdf[-1], xs)
    cut = max(abs(lo), abs(hi)) if cutoff is None else cutoff
    s = EigenvalueStream(ev, None, cut, label or f"quantile(N={N})")
    s.meta.update(kind="quantile")
    return s


def density_stream(rho: float, support: tuple, label: str = "") -> EigenvalueStream:
    """Constant density ``rho`` on ``support``, placed at midpoint quantiles."""
    lo, hi = support
    N = int(round(rho * (hi - lo)))
    return quantile_stream(None, support, N, label=label or f"density({rho})")


def synthesize_stream(spec: dict, h: float = 1.0) -> EigenvalueStream:
    """Build a stream from a spec.

    ``{"kind": "progression", "a": .., "cutoff": .., "scale": 1}``;
    ``{"kind": "uniform", "support": [lo, hi], "N": ..}``;
    ``{"kind": "density", "rho": .., "support": [lo, hi]}`` (``rho`` multiplied by ``h^{-n/2}``
    when ``"m"`` is given, i.e. the rescaled density ``h^{-m-1/2} rho``).
    """
    kind = spec.get("kind")
    if kind == "progression":
        return progression_stream(float(spec["a"]), float(spec["cutoff"]), float(spec.get("scale", 1.0)))
    if kind == "uniform":
        return quantile_stream(None, tuple(spec["support"]), int(spec["N"]))
    if kind == "density":
        rho = float(spec["rho"])
        if "m" in spec:
            rho *= h ** (-int(spec["m"]) - 0.5)
        s = density_stream(rho, tuple(spec["support"]))
        if len(s) == 0:
            raise EmptyStream("empty stream")
        return s
    raise ValueError(f"unknown stream kind {kind!r}")
