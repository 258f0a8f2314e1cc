"""Benchmark: compiled extension kernels vs the pure-NumPy fallback.

Run with `python benchmarks/bench_kernels.py`.  Imports both backends
directly so one process measures both.
"""
from __future__ import annotations

import time

import numpy as np

import cfmlab._kernels_py as pure

try:
    import cfmlab._kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, make_args, call, sizes):
    print(f"\n== {name} ==")
    print(f"{'size':>10} {'pure (ms)':>12} {'compiled (ms)':>14} {'speedup':>9}")
    for size in sizes:
        args = make_args(size)
        t_pure = timeit(lambda: call(pure, *args))
        if compiled is None:
            print(f"{size:>10} {t_pure * 1e3:>12.3f} {'n/a':>14} {'n/a':>9}")
            continue
        t_comp = timeit(lambda: call(compiled, *args))
        print(f"{size:>10} {t_pure * 1e3:>12.3f} {t_comp * 1e3:>14.3f} "
              f"{t_pure / t_comp:>8.1f}x")


def main():
    rng = np.random.default_rng(0)
    if compiled is None:
        print("compiled extension not available; showing fallback timings only")

    bench(
        "activation forward+backward (silu)",
        lambda n: (rng.standard_normal(n), rng.standard_normal(n)),
        lambda mod, x, g: (mod.act_forward(x, 0), mod.act_backward(x, g, 0)),
        [10_000, 100_000, 1_000_000],
    )

    def adam_args(n):
        return tuple(rng.standard_normal(n) for _ in range(4))

    bench(
        "fused adam update",
        adam_args,
        lambda mod, p, g, m, v: mod.adam_update(p.copy(), g, m.copy(), v.copy(),
                                                10, 1e-3, 0.9, 0.999, 1e-8),
        [10_000, 100_000, 1_000_000],
    )

    def lap_args(n):
        a = rng.standard_normal((n, 2))
        b = rng.standard_normal((n, 2))
        d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return (d,)

    bench(
        "exact assignment (squared-distance LAP)",
        lap_args,
        lambda mod, c: mod.solve_assignment(c),
        [64, 256, 512, 1024],
    )


if __name__ == "__main__":
    main()
