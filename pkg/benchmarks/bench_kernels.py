"""Time the compiled and pure-Python simplex kernels on the same programs.

Usage::

    python benchmarks/bench_kernels.py [--sizes 20x200 60x600] [--repeat 5]

Each size ``NxR`` is N variables and R random halfspace rows enclosing the
origin, so every program is feasible and bounded.  Both backends solve the
identical list of programs and must agree on the optimal values.
"""

import argparse
import time

import numpy as np

from scenario_cert import _kernels, lp


def random_programs(n, rows, count, seed):
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        A = gen.standard_normal((rows, n))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        b = gen.uniform(0.5, 1.5, rows)
        out.append(lp.LinearProgram(gen.standard_normal(n), A, b))
    return out


def time_backend(name, programs, repeat, refine):
    _kernels.use_backend(name)
    best, values = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        sols = [lp.solve(p, refine=refine) for p in programs]
        best = min(best, time.perf_counter() - t0)
        values = np.array([s.objective for s in sols])
    return best, values


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["5x40", "20x200", "60x600"])
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--no-refine", action="store_true")
    args = ap.parse_args(argv)
    try:
        _kernels.load_backend("cython")
    except ImportError:
        print("compiled kernel not built; only the Python backend is available")
        return 1
    original = _kernels.BACKEND
    print(f"{'size':>10} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    try:
        for size in args.sizes:
            n, rows = (int(v) for v in size.lower().split("x"))
            progs = random_programs(n, rows, args.count, seed=n * 1000 + rows)
            tp, vp = time_backend("python", progs, args.repeat, not args.no_refine)
            tc, vc = time_backend("cython", progs, args.repeat, not args.no_refine)
            if not np.allclose(vp, vc, rtol=1e-9, atol=1e-9):
                raise SystemExit(f"backends disagree on size {size}")
            print(f"{size:>10} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f}x")
    finally:
        _kernels.use_backend(original)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
