"""Time the vectorized numpy kernels against the numba-compiled loops.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Both paths
are imported directly, so ``DEGSEMI_DISABLE_NUMBA`` has no effect here.
"""

import argparse
import time

import numpy as np

from degsemi import _kernels as k


def _best(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    n = 200_000
    yield "p1_1d n=2e5", "p1_1d", (1.0 / n, 1 + rng.random(n), rng.random(n), False)
    nx = ny = 256
    coef = np.zeros((nx * ny, 2, 2), dtype=np.complex128)
    coef[:, 0, 0] = coef[:, 1, 1] = 1 + rng.random(nx * ny)
    ref = k.q1_reference_integrals(1 / nx, 1 / ny).astype(np.complex128)
    yield "q1_2d 256x256", "q1_2d", (nx, ny, ref, coef, False)
    m = 1_000_000
    x = np.sort(rng.random(m))
    yield "oscillatory_sum m=1e6", "oscillatory_sum", (
        x, np.full(m, 1.0 / m), np.sin(np.pi * x).astype(np.complex128), 64.0,
        2 + np.sin(2 * np.pi * np.arange(4096) / 4096),
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"numba available: {k.NUMBA_AVAILABLE}")
    print(f"{'case':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'ratio':>8}")
    for name, key, a in cases():
        tn = _best(k.NUMPY_KERNELS[key], a, args.repeat)
        tl = _best(k.LOOP_KERNELS[key], a, args.repeat)
        print(f"{name:<24}{1e3 * tn:>12.2f}{1e3 * tl:>12.2f}{tn / tl:>8.2f}")


if __name__ == "__main__":
    main()
