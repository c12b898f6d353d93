"""Time the compiled kernels against their numpy fallbacks.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat 3] [--size 1.0]``.
Each kernel is run on identical inputs by both backends; the script reports
the best wall time, the speed-up and the largest output discrepancy.
"""
import argparse
import time

import numpy as np

from capiso import _kernels_py

try:
    from capiso import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def _best(fn, args, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def cases(size: float, rng):
    m = int(2000 * size)
    x0 = rng.uniform(-1.5, 1.0, m)
    y0 = rng.uniform(-1.5, 1.0, m)
    yield "box_disk_area", "box_disk_area", (x0, x0 + 0.3, y0, y0 + 0.3, 1.0)

    lo = rng.uniform(-1.2, 0.9, (int(400 * size), 3))
    yield "box_ball_volume", "box_ball_volume", (lo, lo + 0.2, 1.0)

    lo2 = rng.uniform(-1.5, 1.0, (int(20000 * size), 2))
    yield "ball_overlap_sum", "ball_overlap_sum", (lo2, lo2 + 0.05, np.array([0.1, -0.2]), 1.0)

    k = int(1500 * size)
    pts = rng.uniform(-1, 1, (k, 2))
    u = 0.5 * np.sum(pts**2, axis=1) + 1e-3 * rng.standard_normal(k)
    yield "contact_mask", "contact_mask", (pts, u, pts.copy(), 0.05, 0.01)

    q = rng.uniform(-1, 1, (int(3000 * size), 2))
    yield "legendre_max", "legendre_max", (q, pts, u)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=float, default=1.0, help="problem size multiplier")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<18}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}{'max |diff|':>12}")
    for name, attr, a in cases(args.size, rng):
        tp, op = _best(getattr(_kernels_py, attr), a, args.repeat)
        if _kernels is None:
            print(f"{name:<18}{tp:>12.4g}{'-':>12}{'-':>10}{'-':>12}")
            continue
        tc, oc = _best(getattr(_kernels, attr), a, args.repeat)
        print(f"{name:<18}{tp:>12.4g}{tc:>12.4g}{tp / tc:>10.2f}{_diff(op, oc):>12.3g}")


if __name__ == "__main__":
    main()
