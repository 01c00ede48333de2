"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 2001]

Also checks that both backends return the same numbers.
"""

import argparse
import time

import numpy as np

from lsvp import _backend


def _inputs(n, rows, seed=0):
    rng = np.random.default_rng(seed)
    y = np.linspace(-10.0, 10.0, n)
    a = -0.5 * y[None, :] ** 2 + 0.1 * rng.standard_normal((rows, n))
    x = np.linspace(-4.0, 4.0, n)
    return a, x, y


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2001)
    ap.add_argument("--rows", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    impls = _backend.implementations()
    if "cython" not in impls:
        print("compiled extension not built; timing the python backend only")
    a, x, y = _inputs(args.n, args.rows)
    cases = {
        "lse_affine": lambda m: m.lse_affine(a, x, y),
        "lse_gauss": lambda m: m.lse_gauss(a, x, y, 0.8, 0.36),
        "legendre_rows": lambda m: m.legendre_rows(-a, y, x),
    }

    print(f"n={args.n} rows={args.rows} repeat={args.repeat}")
    print(f"{'kernel':<15}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}{'max diff':>12}")
    for label, call in cases.items():
        timings, results = {}, {}
        for name, mod in impls.items():
            timings[name], results[name] = _best(lambda: call(mod), args.repeat)
        row = f"{label:<15}" + "".join(f"{timings[name] * 1e3:>10.1f}ms" for name in impls)
        if "cython" in impls:
            ref, fast = results["python"], results["cython"]
            both = np.isfinite(ref) & np.isfinite(fast)
            diff = float(np.max(np.abs(ref[both] - fast[both]))) if both.any() else 0.0
            row += f"{timings['python'] / timings['cython']:>9.1f}x{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
