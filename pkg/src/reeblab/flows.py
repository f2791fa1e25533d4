"""Model flows: Reeb flows on ellipsoids and lens spaces, and a cat-map suspension.

All flows share one small contract (:class:`Flow`).  Points are plain float
arrays whose last axis holds the chart coordinates, so every method accepts a
single point of shape ``(d,)`` or a batch of shape ``(N, d)``.

Lens-space points store ``m + 1`` complex coordinates as interleaved real
pairs ``(x0, y0, x1, y1, ...)``; suspension points are ``(x1, x2, s)`` with
``(x1, x2)`` on the unit torus and ``s`` in ``[0, 1)`` the roof coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend

TWO_PI = 2.0 * np.pi

# Constraint tolerance for points handed to lens-flow operations.
CONSTRAINT_TOL = 1e-9


class InvalidPointError(ValueError):
    """A point does not lie on the flow's phase space."""


class Flow:
    """Contract shared by all model flows.

    Subclasses set ``dim``, ``shortest_period`` and ``velocity_bound`` and
    implement :meth:`evolve`, :meth:`distance` and :meth:`sample`.
    ``velocity_bound`` bounds ``d(e^{tR}x, e^{sR}x) / |t - s|`` and sets the
    time step of recurrence scans.
    """

    dim: int
    shortest_period: float
    velocity_bound: float

    def evolve(self, points, t):
        raise NotImplementedError

    def distance(self, p, q):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int | None = None):
        raise NotImplementedError

    def recurrence_hits(self, points, times, radius: float) -> np.ndarray:
        """Boolean mask: does ``d(e^{tR}x, x) <= radius`` for some ``t`` in ``times``?"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        hit = np.zeros(len(points), dtype=bool)
        for t in np.asarray(times, dtype=float):
            todo = ~hit
            if not todo.any():
                break
            sub = points[todo]
            hit[todo] = self.distance(self.evolve(sub, t), sub) <= radius
        return hit


# ---------------------------------------------------------------------------
# Ellipsoids and lens spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LensSpaceParams:
    """Parameters of ``L(q0, q1, ..., qm; a0, ..., am) = E(a) / Z_{q0}``.

    ``q0 == 1`` is accepted and denotes the ellipsoid ``E(a)`` itself.
    The caller is responsible for flagging whether ``a1/a0, ..., am/a0`` is
    irrational; see :attr:`irrational`.
    """

    q: tuple
    a: tuple
    irrational: bool = True

    def __post_init__(self):
        q = tuple(int(v) for v in self.q)
        a = tuple(float(v) for v in self.a)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a", a)
        if len(q) != len(a) or len(a) < 2:
            raise ValueError("q and a must have the same length m + 1 >= 2")
        if q[0] < 1:
            raise ValueError("q0 must be >= 1 (q0 = 1 is the plain ellipsoid)")
        if any(v < 0 for v in q[1:]):
            raise ValueError("q1..qm must be nonnegative integers")
        if any(not (v > 0 and math.isfinite(v)) for v in a):
            raise ValueError("all a_j must be positive and finite")

    @property
    def m(self) -> int:
        return len(self.a) - 1

    @property
    def q0(self) -> int:
        return self.q[0]

    @property
    def phases(self) -> np.ndarray:
        """Exponents of the generator ``e^{2 pi i / q0}``: ``(1, q1, ..., qm)``."""
        return np.array((1,) + self.q[1:], dtype=np.int64)

    @property
    def tilde(self) -> np.ndarray:
        """Exponents ``(a0 q0, a1 - a0 q1, ..., am - a0 qm)`` governing periodicity."""
        a = np.array(self.a)
        out = a - a[0] * np.array(self.q, dtype=float)
        out[0] = a[0] * self.q[0]
        return out


def ellipsoid(*a: float) -> LensSpaceParams:
    """The ellipsoid ``E(a0, ..., am)`` (trivial quotient)."""
    return LensSpaceParams(q=(1,) + (0,) * (len(a) - 1), a=tuple(a))


def lens(q: Sequence[int], a: Sequence[float], irrational: bool = True) -> LensSpaceParams:
    params = LensSpaceParams(q=tuple(q), a=tuple(a), irrational=irrational)
    if params.q0 < 2:
        raise ValueError("a lens space needs q0 >= 2; use ellipsoid() for q0 = 1")
    return params


def _as_complex(points) -> np.ndarray:
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.shape[-1] % 2:
        raise InvalidPointError("lens coordinates must come in real pairs")
    return arr.view(np.complex128)


def _as_real(z: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(z).view(np.float64)


class LensFlow(Flow):
    """Reeb flow of the tautological contact form on ``E(a) / Z_{q0}``.

    The flow is ``z_j -> e^{i a_j t} z_j``.  Distances are chordal distances in
    the rescaled coordinates ``w_j = sqrt(a_j) z_j`` (where the constraint
    surface is the unit sphere), minimized over the ``Z_{q0}`` orbit.
    """

    def __init__(self, params: LensSpaceParams, shortest_period: float | None = None):
        self.params = params
        self.dim = 2 * (params.m + 1)
        self._a = np.array(params.a)
        self._sqrt_a = np.sqrt(self._a)
        k = np.arange(params.q0)[:, None]
        self._group_angles = np.mod(TWO_PI * k * params.phases[None, :] / params.q0, TWO_PI)
        self._group = np.exp(1j * self._group_angles)
        self.shortest_period = (
            float(shortest_period) if shortest_period is not None else self.axis_period()
        )
        self.velocity_bound = float(self._a.max())

    def axis_period(self) -> float:
        """Shortest period among the coordinate-axis orbits in the quotient."""
        q0 = self.params.q0
        periods = [
            TWO_PI * math.gcd(int(p), q0) / (q0 * aj)
            for p, aj in zip(self.params.phases, self.params.a)
        ]
        return min(periods)

    def constraint(self, points) -> np.ndarray:
        z = _as_complex(points)
        return np.sum(self._a * np.abs(z) ** 2, axis=-1)

    def check(self, points, tol: float = CONSTRAINT_TOL) -> None:
        err = np.abs(self.constraint(points) - 1.0)
        if np.any(err > tol):
            raise InvalidPointError(f"point off the ellipsoid by {float(err.max()):.3g}")

    def normalize(self, points) -> np.ndarray:
        z = _as_complex(points)
        z = z / np.sqrt(np.sum(self._a * np.abs(z) ** 2, axis=-1, keepdims=True))
        return _as_real(z)

    def rescaled(self, points) -> np.ndarray:
        """Complex coordinates ``w = sqrt(a) z`` on the unit sphere."""
        return self._sqrt_a * _as_complex(points)

    def evolve(self, points, t):
        self.check(points)
        z = _as_complex(points)
        t = np.asarray(t, dtype=float)
        angle = np.mod(t[..., None] * self._a, TWO_PI)
        z = z * np.exp(1j * angle)
        z = z / np.sqrt(np.sum(self._a * np.abs(z) ** 2, axis=-1, keepdims=True))
        return _as_real(z)

    def act(self, points, k: int):
        """Apply the ``k``-th element of the ``Z_{q0}`` action."""
        z = _as_complex(points) * self._group[k % self.params.q0]
        return _as_real(z)

    def distance(self, p, q):
        self.check(p)
        self.check(q)
        wp = self.rescaled(p)
        wq = self.rescaled(q)
        best = None
        for u in self._group:
            d = np.sqrt(np.sum(np.abs(wp - u * wq) ** 2, axis=-1))
            best = d if best is None else np.minimum(best, d)
        return best

    def sample(self, rng: np.random.Generator, n: int | None = None):
        shape = (1 if n is None else n, self.params.m + 1)
        w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        w /= np.linalg.norm(w, axis=-1, keepdims=True)
        out = _as_real(w / self._sqrt_a)
        return out[0] if n is None else out

    def recurrence_table(self, times) -> np.ndarray:
        """``2 - 2 cos(a_j t - group angle)`` laid out as ``(steps, q0, m+1)``."""
        times = np.asarray(times, dtype=float)
        ang = np.mod(times[:, None, None] * self._a[None, None, :], TWO_PI)
        ang = ang - self._group_angles[None, :, :]
        return np.ascontiguousarray(2.0 - 2.0 * np.cos(ang))

    def recurrence_hits(self, points, times, radius: float) -> np.ndarray:
        points = np.atleast_2d(points)
        self.check(points)
        r2 = np.ascontiguousarray(np.abs(self.rescaled(points)) ** 2)
        table = self.recurrence_table(times)
        return _backend.kernels.lens_recurrence_hits(r2, table, float(radius) ** 2).astype(bool)

    def is_periodic_time(self, t: float, tol: float = 1e-9) -> bool:
        """Integrality test for ``tilde * t / 2 pi``: the flow is the identity at ``t``."""
        v = self.params.tilde * t / TWO_PI
        return bool(np.all(np.abs(v - np.round(v)) <= tol))


# ---------------------------------------------------------------------------
# Cat-map suspension
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuspensionParams:
    """Hyperbolic toral automorphism with constant roof 1."""

    matrix: tuple

    def __post_init__(self):
        A = np.asarray(self.matrix)
        if A.shape != (2, 2) or not np.all(A == np.round(A)):
            raise ValueError("matrix must be a 2x2 integer matrix")
        A = A.astype(np.int64)
        object.__setattr__(self, "matrix", tuple(tuple(int(v) for v in row) for row in A))
        if int(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]) != 1:
            raise ValueError("matrix must have determinant 1")
        if abs(int(A[0, 0] + A[1, 1])) <= 2:
            raise ValueError("matrix must be hyperbolic (|trace| > 2)")

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=np.int64)

    @property
    def inverse(self) -> np.ndarray:
        (a, b), (c, d) = self.matrix
        return np.array([[d, -b], [-c, a]], dtype=np.int64)

    @property
    def expansion(self) -> float:
        """Leading eigenvalue modulus (spectral radius)."""
        tr = abs(self.matrix[0][0] + self.matrix[1][1])
        return (tr + math.sqrt(tr * tr - 4)) / 2.0

    @property
    def unstable_direction(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.array.astype(float))
        v = vecs[:, int(np.argmax(np.abs(vals)))].real
        return v / np.linalg.norm(v)

    @property
    def stable_direction(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.array.astype(float))
        v = vecs[:, int(np.argmin(np.abs(vals)))].real
        return v / np.linalg.norm(v)


CAT_MAP = SuspensionParams(((2, 1), (1, 1)))


def torus_distance(x, y) -> np.ndarray:
    """Flat distance on the unit torus ``R^k / Z^k`` (last axis)."""
    f = np.mod(np.asarray(x) - np.asarray(y), 1.0)
    f = np.minimum(f, 1.0 - f)
    return np.sqrt(np.sum(f * f, axis=-1))


class SuspensionFlow(Flow):
    """Suspension of a hyperbolic toral automorphism ``A`` with roof 1.

    The phase space is ``T^2 x [0, 1]`` with ``(x, 1) ~ (A x, 0)``.  The
    distance is the local product distance (flat torus distance plus roof
    distance) with one gluing check across the roof in either direction.
    """

    dim = 3

    def __init__(self, params: SuspensionParams = CAT_MAP, velocity_bound: float = 1.0):
        self.params = params
        self._A = params.array
        self._Ainv = params.inverse
        self.shortest_period = 1.0
        self.velocity_bound = float(velocity_bound)

    def apply_matrix(self, x, n):
        """``A^n x mod 1`` by repeated single steps (``n`` may vary per point)."""
        x = np.array(x, dtype=float, copy=True)
        n = np.broadcast_to(np.asarray(n, dtype=np.int64), x.shape[:-1])
        steps = int(np.abs(n).max()) if n.size else 0
        for k in range(1, steps + 1):
            fwd = n >= k
            if np.any(fwd):
                x[fwd] = np.mod(x[fwd] @ self._A.T, 1.0)
            bwd = n <= -k
            if np.any(bwd):
                x[bwd] = np.mod(x[bwd] @ self._Ainv.T, 1.0)
        return x

    def evolve(self, points, t):
        points = np.asarray(points, dtype=float)
        total = points[..., 2] + np.asarray(t, dtype=float)
        n = np.floor(total)
        s = total - n
        x = self.apply_matrix(np.broadcast_to(points[..., :2], s.shape + (2,)), n.astype(np.int64))
        return np.concatenate([x, s[..., None]], axis=-1)

    def distance(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        x, s = p[..., :2], p[..., 2]
        y, u = q[..., :2], q[..., 2]
        direct = torus_distance(x, y) + np.abs(s - u)
        up = torus_distance(self.apply_matrix(x, 1), y) + (1.0 - s + u)
        down = torus_distance(x, self.apply_matrix(y, 1)) + (1.0 - u + s)
        return np.minimum(direct, np.minimum(up, down))

    def sample(self, rng: np.random.Generator, n: int | None = None):
        out = rng.random((1 if n is None else n, 3))
        return out[0] if n is None else out

    def recurrence_hits(self, points, times, radius: float) -> np.ndarray:
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        return _backend.kernels.suspension_recurrence_hits(
            np.ascontiguousarray(points[:, :2]),
            np.ascontiguousarray(points[:, 2]),
            np.ascontiguousarray(times, dtype=float),
            np.ascontiguousarray(self._A),
            float(radius),
        ).astype(bool)

    def perturb_transverse(self, points, delta: float, rng: np.random.Generator):
        """Displace each point by ``delta`` in a random torus direction at fixed roof height."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        theta = rng.uniform(0.0, TWO_PI, len(points))
        out = points.copy()
        out[:, 0] = np.mod(out[:, 0] + delta * np.cos(theta), 1.0)
        out[:, 1] = np.mod(out[:, 1] + delta * np.sin(theta), 1.0)
        return out


class RotationFlow(Flow):
    """Rigid rotation of the unit circle ``R / Z`` at speed ``omega``."""

    dim = 1

    def __init__(self, omega: float):
        if omega == 0:
            raise ValueError("omega must be nonzero")
        self.omega = float(omega)
        self.shortest_period = 1.0 / abs(self.omega)
        self.velocity_bound = abs(self.omega)

    def evolve(self, points, t):
        points = np.asarray(points, dtype=float)
        return np.mod(points + self.omega * np.asarray(t, dtype=float)[..., None], 1.0)

    def distance(self, p, q):
        return torus_distance(p, q)

    def sample(self, rng, n=None):
        out = rng.random((1 if n is None else n, 1))
        return out[0] if n is None else out


class ProductFlow(Flow):
    """Product of two flows with the sum distance."""

    def __init__(self, first: Flow, second: Flow):
        self.first, self.second = first, second
        self.dim = first.dim + second.dim
        self.shortest_period = min(first.shortest_period, second.shortest_period)
        self.velocity_bound = first.velocity_bound + second.velocity_bound

    def _split(self, points):
        points = np.asarray(points, dtype=float)
        return points[..., : self.first.dim], points[..., self.first.dim :]

    def evolve(self, points, t):
        a, b = self._split(points)
        return np.concatenate([self.first.evolve(a, t), self.second.evolve(b, t)], axis=-1)

    def distance(self, p, q):
        pa, pb = self._split(p)
        qa, qb = self._split(q)
        return self.first.distance(pa, qa) + self.second.distance(pb, qb)

    def sample(self, rng, n=None):
        a = self.first.sample(rng, n)
        b = self.second.sample(rng, n)
        return np.concatenate([np.atleast_1d(a), np.atleast_1d(b)], axis=-1)


# ---------------------------------------------------------------------------
# Parameter files
# ---------------------------------------------------------------------------

FLOW_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["lens", "suspension"]},
        "q": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2},
        "a": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "matrix": {
            "type": "array",
            "minItems": 2,
            "maxItems": 2,
            "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        },
        "T0": {"type": "number", "exclusiveMinimum": 0},
        "velocity_bound": {"type": "number", "exclusiveMinimum": 0},
        "irrational": {"type": "boolean"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "lens"}}}, "then": {"required": ["q", "a"]}},
        {
            "if": {"properties": {"kind": {"const": "suspension"}}},
            "then": {"required": ["matrix"]},
        },
    ],
}


def flow_from_dict(spec: dict) -> Flow:
    """Build a flow from a parameter record (see ``FLOW_SCHEMA``)."""
    from .io import validate

    validate(spec, FLOW_SCHEMA)
    if spec["kind"] == "lens":
        params = LensSpaceParams(
            q=tuple(spec["q"]), a=tuple(spec["a"]), irrational=spec.get("irrational", True)
        )
        return LensFlow(params, shortest_period=spec.get("T0"))
    params = SuspensionParams(tuple(tuple(r) for r in spec["matrix"]))
    return SuspensionFlow(params, velocity_bound=spec.get("velocity_bound", 1.0))
