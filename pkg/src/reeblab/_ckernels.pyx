# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline double mod1(double v) noexcept nogil:
    return v - floor(v)


def lens_recurrence_hits(double[:, ::1] r2, double[:, :, ::1] table, double rad2):
    cdef Py_ssize_t N = r2.shape[0], J = r2.shape[1]
    cdef Py_ssize_t S = table.shape[0], K = table.shape[1]
    cdef Py_ssize_t i, s, k, j
    cdef double acc
    cdef bint hit
    out = np.zeros(N, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    with nogil:
        for i in range(N):
            hit = False
            for s in range(S):
                for k in range(K):
                    acc = 0.0
                    for j in range(J):
                        acc = acc + r2[i, j] * table[s, k, j]
                    if acc <= rad2:
                        hit = True
                        break
                if hit:
                    break
            o[i] = hit
    return out


cdef inline double tor(double d0, double d1) noexcept nogil:
    cdef double f0 = mod1(d0), f1 = mod1(d1)
    if 1.0 - f0 < f0:
        f0 = 1.0 - f0
    if 1.0 - f1 < f1:
        f1 = 1.0 - f1
    return sqrt(f0 * f0 + f1 * f1)


cdef inline double susp_dist(double y0, double y1, double u, double Ay0, double Ay1,
                             double x0, double x1, double s, double Ax0, double Ax1) noexcept nogil:
    cdef double direct = tor(y0 - x0, y1 - x1) + fabs(u - s)
    cdef double up = tor(Ay0 - x0, Ay1 - x1) + (1.0 - u + s)
    cdef double down = tor(y0 - Ax0, y1 - Ax1) + (1.0 - s + u)
    if down < up:
        up = down
    if up < direct:
        direct = up
    return direct


def suspension_recurrence_hits(double[:, ::1] x, double[::1] s, double[::1] times,
                               long long[:, ::1] A, double rad):
    cdef Py_ssize_t N = s.shape[0], S = times.shape[0]
    cdef Py_ssize_t i, ti
    cdef double a00 = A[0, 0], a01 = A[0, 1], a10 = A[1, 0], a11 = A[1, 1]
    cdef double x0, x1, Ax0, Ax1, y0, y1, Ay0, Ay1, total, u, t0, si
    cdef long long n, target
    out = np.zeros(N, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    with nogil:
        for i in range(N):
            x0 = x[i, 0]
            x1 = x[i, 1]
            si = s[i]
            Ax0 = mod1(a00 * x0 + a01 * x1)
            Ax1 = mod1(a10 * x0 + a11 * x1)
            y0 = x0
            y1 = x1
            n = 0
            for ti in range(S):
                total = si + times[ti]
                target = <long long>floor(total)
                u = total - target
                while n < target:
                    t0 = mod1(a00 * y0 + a01 * y1)
                    y1 = mod1(a10 * y0 + a11 * y1)
                    y0 = t0
                    n += 1
                Ay0 = mod1(a00 * y0 + a01 * y1)
                Ay1 = mod1(a10 * y0 + a11 * y1)
                if susp_dist(y0, y1, u, Ay0, Ay1, x0, x1, si, Ax0, Ax1) <= rad:
                    o[i] = 1
                    break
    return out


cdef inline Py_ssize_t cell(double v, Py_ssize_t nc) noexcept nogil:
    cdef Py_ssize_t c = <Py_ssize_t>(v * nc)
    if c < 0:
        c = 0
    if c > nc - 1:
        c = nc - 1
    return c


cdef struct Grid:
    Py_ssize_t nc
    Py_ssize_t* head      # per cell, first entry or -1
    Py_ssize_t* nxt       # per entry, next entry or -1
    Py_ssize_t* who       # per entry, cloud index
    Py_ssize_t used
    Py_ssize_t cap


cdef int grid_push(Grid* g, Py_ssize_t key, Py_ssize_t idx) noexcept nogil:
    cdef Py_ssize_t* p
    cdef Py_ssize_t e
    if g.used == g.cap:
        g.cap = 2 * g.cap + 16
        p = <Py_ssize_t*>malloc(g.cap * sizeof(Py_ssize_t))
        if p == NULL:
            return -1
        for e in range(g.used):
            p[e] = g.nxt[e]
        free(g.nxt)
        g.nxt = p
        p = <Py_ssize_t*>malloc(g.cap * sizeof(Py_ssize_t))
        if p == NULL:
            return -1
        for e in range(g.used):
            p[e] = g.who[e]
        free(g.who)
        g.who = p
    g.nxt[g.used] = g.head[key]
    g.who[g.used] = idx
    g.head[key] = g.used
    g.used += 1
    return 0


cdef class _Pack:
    """State for one greedy packing run."""
    cdef double[:, ::1] x
    cdef double[::1] s
    cdef double[::1] times
    cdef double a00, a01, a10, a11, eps
    cdef Py_ssize_t S
    cdef double* traj      # candidate orbit rows (S x 5)
    cdef Py_ssize_t traj_len
    cdef double cx0, cx1, cs
    cdef long long cn

    def __cinit__(self):
        self.traj = NULL

    def __dealloc__(self):
        if self.traj != NULL:
            free(self.traj)

    cdef void start(self, Py_ssize_t i) noexcept nogil:
        self.cx0 = self.x[i, 0]
        self.cx1 = self.x[i, 1]
        self.cs = self.s[i]
        self.cn = 0
        self.traj_len = 0

    cdef double* row(self, Py_ssize_t k) noexcept nogil:
        cdef double total, u, t0
        cdef long long target
        cdef double* r
        while self.traj_len <= k:
            total = self.cs + self.times[self.traj_len]
            target = <long long>floor(total)
            u = total - target
            while self.cn < target:
                t0 = mod1(self.a00 * self.cx0 + self.a01 * self.cx1)
                self.cx1 = mod1(self.a10 * self.cx0 + self.a11 * self.cx1)
                self.cx0 = t0
                self.cn += 1
            r = self.traj + 5 * self.traj_len
            r[0] = self.cx0
            r[1] = self.cx1
            r[2] = u
            r[3] = mod1(self.a00 * self.cx0 + self.a01 * self.cx1)
            r[4] = mod1(self.a10 * self.cx0 + self.a11 * self.cx1)
            self.traj_len += 1
        return self.traj + 5 * k

    cdef bint close(self, Py_ssize_t j) noexcept nogil:
        """True when the kept point ``j`` stays within eps of the candidate on the whole grid."""
        cdef double y0 = self.x[j, 0], y1 = self.x[j, 1], sj = self.s[j]
        cdef double total, u, t0, Ay0, Ay1
        cdef long long n = 0, target
        cdef Py_ssize_t k
        cdef double* r
        for k in range(self.S):
            total = sj + self.times[k]
            target = <long long>floor(total)
            u = total - target
            while n < target:
                t0 = mod1(self.a00 * y0 + self.a01 * y1)
                y1 = mod1(self.a10 * y0 + self.a11 * y1)
                y0 = t0
                n += 1
            Ay0 = mod1(self.a00 * y0 + self.a01 * y1)
            Ay1 = mod1(self.a10 * y0 + self.a11 * y1)
            r = self.row(k)
            if susp_dist(r[0], r[1], r[2], r[3], r[4], y0, y1, u, Ay0, Ay1) >= self.eps:
                return False
        return True


cdef bint scan(_Pack P, Grid* g, Py_ssize_t c0, Py_ssize_t c1, Py_ssize_t cs) noexcept:
    cdef Py_ssize_t nc = g.nc, ds, d0, d1, ls, e, key
    for ds in range(-1, 2):
        ls = cs + ds
        if ls < 0 or ls >= nc:
            continue
        for d0 in range(-1, 2):
            for d1 in range(-1, 2):
                key = (((c0 + d0 + nc) % nc) * nc + ((c1 + d1 + nc) % nc)) * nc + ls
                e = g.head[key]
                while e >= 0:
                    if P.close(g.who[e]):
                        return True
                    e = g.nxt[e]
    return False


def suspension_greedy_pack(double[:, ::1] x, double[::1] s, long long[::1] order,
                           long long[:, ::1] A, double[::1] times, double eps):
    cdef Py_ssize_t nc = <Py_ssize_t>(1.0 / eps)
    if nc < 1:
        nc = 1
    cdef Py_ssize_t ncell = nc * nc * nc, q, i, c0, c1, cs, g0c, g1c
    cdef double g0, g1, xi0, xi1, si
    cdef bint conflict
    cdef Grid g
    cdef _Pack P = _Pack()
    P.x = x
    P.s = s
    P.times = times
    P.S = times.shape[0]
    P.a00 = A[0, 0]
    P.a01 = A[0, 1]
    P.a10 = A[1, 0]
    P.a11 = A[1, 1]
    P.eps = eps
    P.traj = <double*>malloc(5 * (P.S + 1) * sizeof(double))
    g.nc = nc
    g.head = <Py_ssize_t*>malloc(ncell * sizeof(Py_ssize_t))
    g.nxt = NULL
    g.who = NULL
    g.used = 0
    g.cap = 0
    if P.traj == NULL or g.head == NULL:
        free(g.head)
        raise MemoryError()
    for q in range(ncell):
        g.head[q] = -1
    kept = []
    try:
        for q in range(order.shape[0]):
            i = order[q]
            xi0 = x[i, 0]
            xi1 = x[i, 1]
            si = s[i]
            P.start(i)
            c0 = cell(xi0, nc)
            c1 = cell(xi1, nc)
            cs = cell(si, nc)
            conflict = scan(P, &g, c0, c1, cs)
            g0c = -1
            if si >= 1.0 - eps:
                g0 = mod1(P.a00 * xi0 + P.a01 * xi1)
                g1 = mod1(P.a10 * xi0 + P.a11 * xi1)
                g0c = cell(g0, nc)
                g1c = cell(g1, nc)
                if not conflict:
                    conflict = scan(P, &g, g0c, g1c, 0)
            if conflict:
                continue
            kept.append(i)
            if grid_push(&g, (c0 * nc + c1) * nc + cs, i) < 0:
                raise MemoryError()
            if g0c >= 0:
                if grid_push(&g, (g0c * nc + g1c) * nc + 0, i) < 0:
                    raise MemoryError()
    finally:
        free(g.head)
        free(g.nxt)
        free(g.who)
    return np.array(kept, dtype=np.int64)
