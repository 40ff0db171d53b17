"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 500 2000] [--repeat 3]

Each kernel is run once untimed (JIT warm-up), then the best of
``--repeat`` runs is reported.  Results of both paths are compared as a
sanity check.
"""

import argparse
import time

import numpy as np

from triobs import _kernels


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(N, rng):
    Z = rng.uniform(-1, 1, (N, 3))
    V = np.sin(Z).sum(axis=1, keepdims=True)
    Q = rng.uniform(-1.2, 1.2, (N, 3))
    s = np.logspace(-3, 0, 31)
    return {
        "pair_ratio_max": (Z, Z, V, 1e-4),
        "mcshane_envelope": (Z, V, 3.0, Q),
        "consistency_excess": (Z, V, 3.0),
        "modulus_bins": (Z, V, s),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':20s} {'N':>6s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s} match")
    for N in args.sizes:
        for name, a in cases(N, rng).items():
            t_np, r_np = best_of(lambda: getattr(_kernels, f"{name}_numpy")(*a), args.repeat)
            t_nb, r_nb = best_of(lambda: getattr(_kernels, f"{name}_numba")(*a), args.repeat)
            print(f"{name:20s} {N:6d} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.1f} {same(r_np, r_nb)}")


if __name__ == "__main__":
    main()
