"""Pure numpy reference implementations of the hot loops.

The compiled module ``_ckernels`` mirrors these functions one to one and
uses the same floating-point operation order, so both backends agree
bit for bit on everything except pathological ties.
"""
from __future__ import annotations

import numpy as np

_POINT_CHUNK = 512
_TIME_BLOCK = 2048


def mod1(v):
    """Reduce to ``[0, 1)`` as ``v - floor(v)``."""
    return v - np.floor(v)


def lens_recurrence_hits(r2, table, rad2):
    """Recurrence test for lens flows.

    Parameters
    ----------
    r2 : (N, J) array
        ``|w_j|^2`` for each sample.
    table : (S, K, J) array
        ``2 - 2 cos(a_j t_s - g_{k,j})`` for grid times ``t_s`` and group elements ``k``.
    rad2 : float
        Squared test radius.

    Returns
    -------
    (N,) uint8 array, 1 where some ``(s, k)`` gives squared distance ``<= rad2``.
    """
    r2 = np.asarray(r2, dtype=np.float64)
    S, K, J = table.shape
    flat = table.reshape(S * K, J)
    out = np.zeros(len(r2), dtype=np.uint8)
    for lo in range(0, len(r2), _POINT_CHUNK):
        idx = np.arange(lo, min(lo + _POINT_CHUNK, len(r2)))
        for b in range(0, S * K, _TIME_BLOCK * K):
            if idx.size == 0:
                break
            blk = flat[b : b + _TIME_BLOCK * K]
            acc = np.zeros((idx.size, len(blk)))
            for j in range(J):
                acc += r2[idx, j : j + 1] * blk[None, :, j]
            found = (acc <= rad2).any(axis=1)
            out[idx[found]] = 1
            idx = idx[~found]
    return out


def _step(x0, x1, A):
    return mod1(A[0, 0] * x0 + A[0, 1] * x1), mod1(A[1, 0] * x0 + A[1, 1] * x1)


def _tor(dx0, dx1):
    f0 = mod1(dx0)
    f1 = mod1(dx1)
    f0 = np.minimum(f0, 1.0 - f0)
    f1 = np.minimum(f1, 1.0 - f1)
    return np.sqrt(f0 * f0 + f1 * f1)


def _susp_dist(y0, y1, u, Ay0, Ay1, x0, x1, s, Ax0, Ax1):
    """Local product distance between (y, u) and (x, s) given both images under A."""
    direct = _tor(y0 - x0, y1 - x1) + np.abs(u - s)
    up = _tor(Ay0 - x0, Ay1 - x1) + (1.0 - u + s)
    down = _tor(y0 - Ax0, y1 - Ax1) + (1.0 - s + u)
    return np.minimum(direct, np.minimum(up, down))


def suspension_recurrence_hits(x, s, times, A, rad):
    """Recurrence test for the suspension flow on a sorted nonnegative time grid."""
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    A = np.asarray(A, dtype=np.int64).astype(np.float64)
    N = len(s)
    out = np.zeros(N, dtype=np.uint8)
    x0, x1 = x[:, 0], x[:, 1]
    Ax0, Ax1 = _step(x0, x1, A)
    # current orbit state: torus point after n roof crossings
    y0, y1 = x0.copy(), x1.copy()
    n = np.zeros(N, dtype=np.int64)
    live = np.arange(N)
    for t in times:
        if live.size == 0:
            break
        total = s[live] + t
        target = np.floor(total).astype(np.int64)
        u = total - target
        while True:
            need = n[live] < target
            if not need.any():
                break
            w = live[need]
            y0[w], y1[w] = _step(y0[w], y1[w], A)
            n[w] += 1
        Ay0, Ay1 = _step(y0[live], y1[live], A)
        d = _susp_dist(
            y0[live], y1[live], u, Ay0, Ay1,
            x0[live], x1[live], s[live], Ax0[live], Ax1[live],
        )
        hit = d <= rad
        out[live[hit]] = 1
        live = live[~hit]
    return out


def _cell(v, nc):
    c = int(v * nc)
    return min(max(c, 0), nc - 1)


class _Traj:
    """Lazily extended orbit of one suspension point on the time grid."""

    __slots__ = ("x0", "x1", "s", "n", "rows", "A", "times")

    def __init__(self, x0, x1, s, A, times):
        self.x0, self.x1, self.s, self.n = x0, x1, s, 0
        self.rows = []
        self.A = A
        self.times = times

    def get(self, i):
        A = self.A
        while len(self.rows) <= i:
            total = self.s + self.times[len(self.rows)]
            k = int(np.floor(total))
            u = total - k
            while self.n < k:
                a0 = A[0, 0] * self.x0 + A[0, 1] * self.x1
                a1 = A[1, 0] * self.x0 + A[1, 1] * self.x1
                self.x0 = a0 - np.floor(a0)
                self.x1 = a1 - np.floor(a1)
                self.n += 1
            b0 = A[0, 0] * self.x0 + A[0, 1] * self.x1
            b1 = A[1, 0] * self.x0 + A[1, 1] * self.x1
            self.rows.append((self.x0, self.x1, u, b0 - np.floor(b0), b1 - np.floor(b1)))
        return self.rows[i]


def _tor_scalar(d0, d1):
    f0 = d0 - np.floor(d0)
    f1 = d1 - np.floor(d1)
    f0 = min(f0, 1.0 - f0)
    f1 = min(f1, 1.0 - f1)
    return float(np.sqrt(f0 * f0 + f1 * f1))


def _pair_dist(p, q):
    y0, y1, u, Ay0, Ay1 = p
    x0, x1, s, Ax0, Ax1 = q
    direct = _tor_scalar(y0 - x0, y1 - x1) + abs(u - s)
    up = _tor_scalar(Ay0 - x0, Ay1 - x1) + (1.0 - u + s)
    down = _tor_scalar(y0 - Ax0, y1 - Ax1) + (1.0 - s + u)
    return min(direct, min(up, down))


def suspension_greedy_pack(x, s, order, A, times, eps):
    """Greedy ``(T, eps)``-separated subset of a suspension point cloud.

    Candidates are visited in ``order`` and kept when their Bowen distance
    (maximum over ``times``) to every kept point is at least ``eps``.  Only
    kept points within ``eps`` at time 0 can conflict, so kept points are
    indexed in a torus-by-roof cell grid with cell size ``>= eps``; points near
    the roof are also indexed through the gluing.

    Returns
    -------
    (M,) int64 array of kept indices, in acceptance order.
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    Af = np.asarray(A, dtype=np.int64).astype(np.float64)
    times = np.asarray(times, dtype=np.float64)
    nc = max(1, int(1.0 / eps))
    cells: dict = {}
    kept = []
    trajs: dict = {}
    S = len(times)

    def neighbours(c0, c1, cs):
        for ds in (-1, 0, 1):
            ls = cs + ds
            if ls < 0 or ls >= nc:
                continue
            for d0 in (-1, 0, 1):
                for d1 in (-1, 0, 1):
                    key = ((c0 + d0) % nc, (c1 + d1) % nc, ls)
                    yield from cells.get(key, ())

    for i in np.asarray(order, dtype=np.int64):
        i = int(i)
        xi0, xi1, si = float(x[i, 0]), float(x[i, 1]), float(s[i])
        me = _Traj(xi0, xi1, si, Af, times)
        c0, c1, cs = _cell(xi0, nc), _cell(xi1, nc), _cell(si, nc)
        cand = list(neighbours(c0, c1, cs))
        if si >= 1.0 - eps:
            g0 = Af[0, 0] * xi0 + Af[0, 1] * xi1
            g1 = Af[1, 0] * xi0 + Af[1, 1] * xi1
            cand += list(neighbours(_cell(g0 - np.floor(g0), nc), _cell(g1 - np.floor(g1), nc), 0))
        ok = True
        for j in cand:
            other = trajs[j]
            close = True
            for k in range(S):
                if _pair_dist(me.get(k), other.get(k)) >= eps:
                    close = False
                    break
            if close:
                ok = False
                break
        if not ok:
            continue
        kept.append(i)
        trajs[i] = _Traj(xi0, xi1, si, Af, times)
        cells.setdefault((c0, c1, cs), []).append(i)
        if si >= 1.0 - eps:
            g0 = Af[0, 0] * xi0 + Af[0, 1] * xi1
            g1 = Af[1, 0] * xi0 + Af[1, 1] * xi1
            key = (_cell(g0 - np.floor(g0), nc), _cell(g1 - np.floor(g1), nc), 0)
            cells.setdefault(key, []).append(i)
    return np.array(kept, dtype=np.int64)
