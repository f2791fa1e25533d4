"""Irrationality exponents: continued fractions for single reals, record minima
of the torus line flow for tuples.

Real inputs are supplied as evaluators: objects that return an exact
:class:`fractions.Fraction` when the number is rational, or an ``mpmath``
value at a requested number of decimal digits otherwise.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar


class PrecisionExhausted(ArithmeticError):
    """The evaluator's precision does not determine the requested quotients."""


class TooFewConvergents(ValueError):
    pass


class NoRecords(ValueError):
    """Record-minima search found no usable records."""


# ---------------------------------------------------------------------------
# Real-number evaluators
# ---------------------------------------------------------------------------


class RealNumber:
    """A real number evaluable to arbitrary precision.

    Parameters
    ----------
    func : callable
        ``func(dps)`` returns an ``mpmath.mpf`` accurate to about ``dps`` digits.
    exact : Fraction, optional
        Exact value when the number is rational.
    label : str
    """

    def __init__(self, func: Callable[[int], mpmath.mpf] | None = None,
                 exact: Fraction | None = None, label: str = ""):
        if func is None and exact is None:
            raise ValueError("need an evaluator or an exact value")
        self.func = func
        self.exact = exact
        self.label = label

    def __call__(self, dps: int = 50):
        if self.exact is not None:
            return self.exact
        with mpmath.workdps(dps + 10):
            return +self.func(dps)

    def __repr__(self):
        return f"RealNumber({self.label or self.exact!r})"


def liouville(dps_terms: int | None = None) -> RealNumber:
    """``sum_k 10^{-k!}``, either infinite (to working precision) or cut after ``dps_terms`` terms."""
    if dps_terms is not None:
        val = sum(Fraction(1, 10 ** math.factorial(k)) for k in range(1, dps_terms + 1))
        return RealNumber(exact=val, label=f"liouville[{dps_terms}]")

    def f(dps):
        total = mpmath.mpf(0)
        k = 1
        while math.factorial(k) <= dps + 20:
            total += mpmath.mpf(10) ** (-math.factorial(k))
            k += 1
        return total

    return RealNumber(f, label="liouville")


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {
    "sqrt": mpmath.sqrt,
    "cbrt": mpmath.cbrt,
    "exp": mpmath.exp,
    "log": mpmath.log,
    "sin": mpmath.sin,
    "cos": mpmath.cos,
}
_CONSTS = {
    "pi": lambda: +mpmath.pi,
    "e": lambda: mpmath.e + 0,
    "phi": lambda: (1 + mpmath.sqrt(5)) / 2,
}


def _eval_node(node, exact: bool):
    """Evaluate a whitelisted AST; with ``exact`` only rational arithmetic is allowed."""
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, exact)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        if isinstance(node.value, float):
            if exact:
                return Fraction(str(node.value))
            return mpmath.mpf(str(node.value))
        return Fraction(node.value) if exact else mpmath.mpf(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, exact)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        left = _eval_node(node.left, exact)
        right = _eval_node(node.right, exact)
        if exact and isinstance(node.op, ast.Pow):
            if right.denominator != 1:
                raise _NotRational
            return left ** int(right)
        return _BINOPS[type(node.op)](left, right)
    if isinstance(node, ast.Name) and node.id in _CONSTS:
        if exact:
            raise _NotRational
        return _CONSTS[node.id]()
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if name in _FUNCS and len(node.args) == 1 and not node.keywords:
            if exact:
                raise _NotRational
            return _FUNCS[name](_eval_node(node.args[0], False))
        if name == "liouville" and len(node.args) == 1:
            k = node.args[0]
            if not (isinstance(k, ast.Constant) and isinstance(k.value, int)):
                raise ValueError("liouville() takes an integer literal")
            if exact:
                return liouville(k.value).exact
            return mpmath.mpf(liouville(k.value).exact.numerator) / liouville(k.value).exact.denominator
    raise ValueError(f"unsupported expression element: {ast.dump(node)[:60]}")


class _NotRational(Exception):
    pass


def parse_real(expr: str) -> RealNumber:
    """Parse an arithmetic expression such as ``"(1+sqrt(5))/2"`` or ``"1/3"``.

    Allowed: numeric literals, ``+ - * / **``, ``sqrt cbrt exp log sin cos``,
    the constants ``pi e phi``, and ``liouville(k)`` (the series cut after ``k``
    terms).  Purely rational expressions are kept exact.
    """
    tree = ast.parse(expr.strip(), mode="eval")
    try:
        return RealNumber(exact=_eval_node(tree, True), label=expr)
    except _NotRational:
        pass

    def f(dps):
        with mpmath.workdps(dps + 10):
            return _eval_node(tree, False)

    f(15)  # fail early on malformed input
    return RealNumber(f, label=expr)


# ---------------------------------------------------------------------------
# Continued fractions
# ---------------------------------------------------------------------------


@dataclass
class ContinuedFraction:
    partial_quotients: list
    convergents: list
    terminated: bool
    dps: int | None = None

    def __len__(self):
        return len(self.partial_quotients)


def _mpf_to_fraction(x) -> Fraction:
    man, exp = mpmath.mpf(x).man_exp
    return Fraction(int(man)) * (Fraction(2) ** int(exp)) if man else Fraction(0)


def _cf_step(y: Fraction):
    a = y.numerator // y.denominator
    return a, y - a


def cf_expand(a, depth: int, dps: int = 100) -> ContinuedFraction:
    """Continued fraction ``[a0; a1, ...]`` with at most ``depth`` quotients.

    Irrational inputs are evaluated at ``dps`` digits and bracketed by an
    interval of the evaluation error; a quotient is accepted only when both
    ends of the bracket agree on it, so every returned quotient is certified.

    Raises
    ------
    PrecisionExhausted
        The bracket splits before ``depth`` quotients are determined.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not isinstance(a, RealNumber):
        a = parse_real(a) if isinstance(a, str) else RealNumber(exact=Fraction(a))
    quotients = []
    if a.exact is not None:
        y = a.exact
        terminated = False
        while len(quotients) < depth:
            q, f = _cf_step(y)
            quotients.append(q)
            if f == 0:
                terminated = True
                break
            y = 1 / f
        return ContinuedFraction(quotients, _convergents(quotients), terminated, None)

    with mpmath.workdps(dps + 10):
        mid = mpmath.mpf(a(dps))
        rad = (abs(mid) + 1) * mpmath.mpf(10) ** (-dps)
        lo = _mpf_to_fraction(mid - rad)
        hi = _mpf_to_fraction(mid + rad)
    while len(quotients) < depth:
        qa, fa = _cf_step(lo)
        qb, fb = _cf_step(hi)
        if qa != qb or fa == 0 or fb == 0:
            raise PrecisionExhausted(
                f"{dps} digits determine only {len(quotients)} quotients of {a!r}"
            )
        quotients.append(qa)
        # the map y -> 1/(y - q) reverses order
        lo, hi = 1 / fb, 1 / fa
    return ContinuedFraction(quotients, _convergents(quotients), False, dps)


def _convergents(quotients) -> list:
    out = []
    p0, q0, p1, q1 = 1, 0, 0, 1
    for a in quotients:
        p0, p1 = a * p0 + p1, p0
        q0, q1 = a * q0 + q1, q0
        out.append((p0, q0))
    return out


@dataclass
class IrrationalityEstimate:
    exponent: float
    method: str
    evidence: list = field(default_factory=list)
    window: tuple | None = None
    fit_residual: float | None = None
    periodic: bool = False

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "method": self.method,
            "records": [list(map(float, r)) for r in self.evidence],
            "window": list(self.window) if self.window else None,
            "fit_residual": self.fit_residual,
            "periodic": self.periodic,
        }


def estimate_mu(cf: ContinuedFraction, tail: float = 0.6) -> IrrationalityEstimate:
    """Irrationality exponent from convergent denominators.

    Returns ``1 + max ln q_{k+1} / ln q_k`` over the last ``tail`` fraction of
    the convergents with ``q_k > 1``; returns exactly 1 for a terminating
    expansion.
    """
    if cf.terminated:
        return IrrationalityEstimate(1.0, "continued_fraction", list(cf.convergents))
    qs = [q for _, q in cf.convergents]
    idx = [k for k in range(len(qs) - 1) if qs[k] > 1]
    if len(cf.convergents) < 3 or len(idx) < 2:
        raise TooFewConvergents("need at least 3 convergents with q > 1")
    start = idx[min(len(idx) - 1, int(math.floor((1.0 - tail) * len(idx))))]
    window = [k for k in idx if k >= start]
    ratios = [math.log(qs[k + 1]) / math.log(qs[k]) for k in window]
    best = int(np.argmax(ratios))
    return IrrationalityEstimate(
        1.0 + ratios[best],
        "continued_fraction",
        [(qs[k], _approx_gap(cf, k)) for k in window],
        window=(window[0], window[-1] + 1),
    )


def _approx_gap(cf: ContinuedFraction, k: int) -> float:
    """``|p_k/q_k - p_{k+1}/q_{k+1}| = 1/(q_k q_{k+1})``, an upper bound on the error of ``p_k/q_k``."""
    q0 = cf.convergents[k][1]
    q1 = cf.convergents[k + 1][1]
    return float(Fraction(1, q0 * q1))


# ---------------------------------------------------------------------------
# Simultaneous approximation along the torus line
# ---------------------------------------------------------------------------


def torus_line_distance(a: Sequence[float], t) -> np.ndarray:
    """Euclidean distance from ``t * a`` to the integer lattice."""
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    v = t[..., None] * a
    f = v - np.round(v)
    return np.sqrt(np.sum(f * f, axis=-1))


def _records(a, s_lo, s_hi, coarse, fine):
    """Record minima of the unit-speed line ``s * a/|a|`` over ``[s_lo, s_hi]``."""
    speed = float(np.linalg.norm(a))
    u = np.asarray(a, dtype=float) / speed
    h = 1.0 / coarse
    grid = s_lo + h * np.arange(int(math.ceil((s_hi - s_lo) * coarse)) + 1)
    d = torus_line_distance(u, grid)
    # interior local minima of the sampled curve plus the endpoints
    cand = np.flatnonzero((d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:])) + 1
    cand = np.concatenate(([0], cand, [len(grid) - 1]))
    # |d'| <= 1 for a unit-speed line, so a cell cannot dip below d - h
    lower = d[cand] - h
    records = []
    best = np.inf
    f = lambda s: float(torus_line_distance(u, s))
    for i, lb in zip(cand, lower):
        if lb >= best:
            continue
        lo_s = max(s_lo, grid[i] - h)
        hi_s = min(s_hi, grid[i] + h)
        fg = np.linspace(lo_s, hi_s, max(3, int(math.ceil((hi_s - lo_s) * fine)) + 1))
        fd = torus_line_distance(u, fg)
        j = int(np.argmin(fd))
        s_star, d_star = float(fg[j]), float(fd[j])
        if 0 < j < len(fg) - 1 and fd[j] < fd[j - 1] and fd[j] < fd[j + 1]:
            res = minimize_scalar(f, bracket=(fg[j - 1], fg[j], fg[j + 1]), method="golden",
                                  options={"xtol": 1e-12})
            if res.fun < d_star and lo_s <= res.x <= hi_s:
                s_star, d_star = float(res.x), float(res.fun)
        if d_star < best:
            best = d_star
            records.append((s_star, d_star))
    return records, speed


def estimate_nu(a: Sequence[float], t_max: float = 1e4, coarse: float = 10.0,
                fine: float = 1e3, fit_fraction: float = 0.6,
                lattice_tol: float = 1e-9) -> IrrationalityEstimate:
    """Simultaneous irrationality exponent of ``a`` from record minima of ``d(t a; Z^n)``.

    The line is scanned at unit speed over arclength ``[1, t_max]`` (the
    estimate depends on the line only, not on the scale of ``a``); evidence
    times are reported in the original parametrization.  ``nu = 1 + slope``
    where ``-slope`` is the least-squares log-log slope of the latest
    ``fit_fraction`` of the records.  A line that returns to the lattice is
    reported with ``periodic=True`` and exponent 1.
    """
    a = np.asarray(a, dtype=float)
    if t_max < 10:
        raise ValueError("t_max must be >= 10")
    if not np.any(a):
        raise ValueError("a must be nonzero")
    records, speed = _records(a, 1.0, float(t_max), coarse, fine)
    evidence = [(s / speed, d) for s, d in records]
    if records and records[-1][1] <= lattice_tol:
        return IrrationalityEstimate(1.0, "record_minima", evidence, periodic=True)
    if len(records) < 4:
        raise NoRecords(f"only {len(records)} records found up to t_max={t_max}")
    k0 = int(math.floor((1.0 - fit_fraction) * len(records)))
    use = np.array(records[k0:])
    X = np.log(use[:, 0])
    Y = np.log(use[:, 1])
    coef, resid, *_ = np.polyfit(X, Y, 1, full=True)
    rms = float(np.sqrt(resid[0] / len(X))) if len(resid) else 0.0
    return IrrationalityEstimate(
        1.0 - float(coef[0]),
        "record_minima",
        evidence,
        window=(k0, len(records)),
        fit_residual=rms,
    )


@dataclass
class LowerBoundReport:
    holds: bool
    witness: float | None
    worst_ratio: float

    def __bool__(self):
        return self.holds


def check_lower_bound(a: Sequence[float], nu: float, C: float, t_samples) -> LowerBoundReport:
    """Check ``d(t a; Z^n) > C t^{1 - nu}`` on the samples; return the first failing ``t``."""
    t = np.asarray(t_samples, dtype=float)
    d = torus_line_distance(a, t)
    bound = C * t ** (1.0 - nu)
    fail = np.flatnonzero(~(d > bound))
    ratio = float(np.min(d / bound)) if len(t) else np.inf
    if fail.size:
        return LowerBoundReport(False, float(t[fail[0]]), ratio)
    return LowerBoundReport(True, None, ratio)
