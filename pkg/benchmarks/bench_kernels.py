"""Compare the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on
identical inputs under both backends and the outputs are compared.
"""
import argparse
import time

import numpy as np

from reeblab import _backend, _pykernels
from reeblab.entropy import BowenConfig, max_separated, suspension_lattice_cloud
from reeblab.flows import SuspensionFlow

CAT = np.array([[2, 1], [1, 1]], dtype=np.int64)


def lens_case(rng, n):
    r2 = rng.random((n, 2))
    r2 /= r2.sum(axis=1)[:, None]
    t = np.linspace(2.0, 64, 4000)
    g = np.array([[0.0, 0.0], [np.pi, np.pi * 0.6]])
    a = np.array([1.0, (1 + 5 ** 0.5) / 2])
    table = np.ascontiguousarray(2 - 2 * np.cos(a[None, None, :] * t[:, None, None] - g[None]))
    return lambda k: k.lens_recurrence_hits(r2, table, 1e-4)


def suspension_case(rng, n):
    x = rng.random((n, 2))
    s = rng.random(n)
    times = np.arange(0.5, 8.0, 0.05)
    return lambda k: k.suspension_recurrence_hits(x, s, times, CAT, 0.02)


def packing_case(M):
    cloud = suspension_lattice_cloud(M, 10)
    flow = SuspensionFlow()

    def run(k):
        _backend.kernels = k
        return np.array([max_separated(flow, BowenConfig(3.0, 0.05, cloud)).count])

    return run


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = np.asarray(fn())
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="points per hit kernel")
    ap.add_argument("--M", type=int, default=60, help="lattice side for the packing cloud")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        from reeblab import _ckernels
    except ImportError:
        raise SystemExit("compiled backend not built; run pip install -e . --no-build-isolation")
    rng = np.random.default_rng(0)
    cases = {
        "lens_recurrence_hits": lens_case(rng, args.n),
        "suspension_recurrence_hits": suspension_case(rng, args.n),
        "suspension_greedy_pack": packing_case(args.M),
    }
    old = _backend.kernels
    print(f"{'kernel':30s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}  same")
    try:
        for name, case in cases.items():
            tp, op = timed(lambda: case(_pykernels), args.repeat)
            tc, oc = timed(lambda: case(_ckernels), args.repeat)
            print(f"{name:30s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}  {np.array_equal(op, oc)}")
    finally:
        _backend.kernels = old


if __name__ == "__main__":
    main()
