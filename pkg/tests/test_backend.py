import numpy as np
import pytest

from reeblab import _backend, _pykernels

ck = pytest.importorskip("reeblab._ckernels")

CAT = np.array([[2, 1], [1, 1]])


def test_lens_hits_identical(rng):
    r2 = rng.random((3000, 2))
    r2 /= r2.sum(axis=1)[:, None]
    t = np.linspace(0, 30, 700)
    g = np.array([[0.0, 0.0], [np.pi, np.pi * 0.6]])
    a = np.array([1.0, 1.618])
    table = np.ascontiguousarray(2 - 2 * np.cos(a[None, None, :] * t[:, None, None] - g[None]))
    for rad2 in (1e-4, 1e-3, 1e-2):
        py = _pykernels.lens_recurrence_hits(r2, table, rad2)
        cy = np.asarray(ck.lens_recurrence_hits(r2, table, rad2))
        assert np.array_equal(py, cy)


def test_suspension_hits_identical(rng):
    x = rng.random((3000, 2))
    s = rng.random(3000)
    times = np.arange(0.0, 4.0, 0.05)
    for rad in (0.02, 0.05, 0.1):
        py = _pykernels.suspension_recurrence_hits(x, s, times, CAT, rad)
        cy = np.asarray(ck.suspension_recurrence_hits(x, s, times, CAT.astype(np.int64), rad))
        assert np.array_equal(py, cy)


def test_use_switches_and_rejects():
    old = _backend.BACKEND
    try:
        _backend.use("python")
        assert _backend.kernels is _pykernels
        _backend.use("cython")
        assert _backend.kernels is ck
        with pytest.raises(ValueError):
            _backend.use("fortran")
    finally:
        _backend.use(old)
