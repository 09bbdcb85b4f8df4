"""Benchmark the hot kernels under the numba and numpy backends.

Usage: python benchmarks/bench_kernels.py [--sizes 10000,100000] [--repeat 20]

Times the per-row score matrix, the random-sampling scores, and the Newton
logistic fit on synthetic data of each size, and prints a table of
best-of-repeat timings plus the numba speedup. The numba column is skipped
when numba is not installed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from godds import _backend, _kernels


def synth(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 3))
    pi1 = 1.0 / (1.0 + np.exp(-(0.2 + 0.5 * x[:, 0])))
    mu1 = 1.0 / (1.0 + np.exp(-(-0.3 + 0.8 * x[:, 1])))
    mu0 = 1.0 / (1.0 + np.exp(-(-0.8 + 0.5 * x[:, 2])))
    a = (rng.random(n) < pi1).astype(np.int8)
    y = (rng.random(n) < np.where(a == 1, mu1, mu0)).astype(np.int8)
    eta = pi1 * mu1 + (1.0 - pi1) * mu0
    return y, a, x, mu1, mu0, pi1, eta


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n: int, repeat: int) -> list[tuple[str, dict[str, float]]]:
    y, a, x, mu1, mu0, pi1, eta = synth(n)
    design = np.column_stack([np.ones(n), x])
    labels = y.astype(np.float64)

    tasks = {
        "score_matrix": lambda: _kernels.score_matrix(y, a, mu1, mu0, pi1, eta, 0.5),
        "rs_scores": lambda: _kernels.rs_scores(y, a, mu1, mu0, pi1),
        "logistic_newton": lambda: _kernels.logistic_newton(design, labels, 1e-4, 100, 1e-10),
    }
    backends = ["numpy"] + (["numba"] if _backend.HAVE_NUMBA else [])
    rows = []
    for name, fn in tasks.items():
        timings = {}
        for backend in backends:
            _backend.set_backend(backend)
            fn()  # warm-up (numba compiles on first call)
            timings[backend] = best_of(fn, repeat)
        rows.append((name, timings))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="10000,100000")
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if not _backend.HAVE_NUMBA:
        print("numba not installed: timing the numpy fallback only\n")

    header = f"{'kernel':<18} {'n':>9} {'numpy (ms)':>12}"
    if _backend.HAVE_NUMBA:
        header += f" {'numba (ms)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        for name, timings in bench(n, args.repeat):
            line = f"{name:<18} {n:>9} {timings['numpy'] * 1e3:>12.3f}"
            if "numba" in timings:
                speedup = timings["numpy"] / timings["numba"]
                line += f" {timings['numba'] * 1e3:>12.3f} {speedup:>8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
