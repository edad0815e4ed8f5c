"""Time the numba kernels against the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both variants are imported side by side, so the environment flag does not
matter here. Numba compile time is excluded by one warm-up call.
"""

import argparse
import timeit

import numpy as np

from tsconsensus import kernels

B4 = np.array(
    [
        [2.0, 0.0, -1.0, -1.0],
        [0.0, 3.0, 0.0, 0.0],
        [-1.0, 0.0, 3.0, -1.0],
        [-1.0, 0.0, -1.0, 3.0],
    ]
)


def _rk4_args(nsteps):
    eps = np.array([1.0, 0.5, -0.5, 0.25])
    return (kernels.F_SINE_INV_SQRT_T, 0.25, kernels.G_COSINE, np.array([2.0, 1.0]), B4, np.zeros(4),
            1.0, 1.0 + nsteps * 1e-3, eps, nsteps)


def _sym(n, seed=0):
    m = np.random.default_rng(seed).normal(size=(n, n))
    return (m + m.T) / 2


def cases():
    for nsteps in (1_000, 10_000):
        args = _rk4_args(nsteps)
        yield f"rk4 n=4 steps={nsteps}", kernels._rk4_numba, kernels._rk4_numpy, args
    for n in (4, 16, 48):
        args = (_sym(n), 1e-12, kernels.MAX_SWEEPS)
        yield f"jacobi n={n}", kernels._jacobi_numba, kernels._jacobi_numpy, args


def best_of(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, fast, slow, call_args in cases():
        fast(*call_args)
        t_fast = best_of(fast, call_args, args.repeat)
        t_slow = best_of(slow, call_args, args.repeat)
        print(f"{name:<24}{t_fast * 1e3:>10.3f}ms{t_slow * 1e3:>10.3f}ms{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
