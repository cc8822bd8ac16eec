"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--modes 4 8 12]

Prints the best-of-``repeat`` wall time per call for each kernel and the
speedup of the compiled path.
"""
import argparse
import timeit

import numpy as np

from fermiwick import _fallback

try:
    from fermiwick import _core
except ImportError:
    _core = None


def cases(n, rng):
    levels = rng.uniform(-5, 5, 1 << n)
    eps = rng.uniform(0.2, 3.0, n)
    target = np.ascontiguousarray(np.sort(rng.dirichlet(np.ones(1 << n)))[::-1])
    starts = np.ascontiguousarray(eps + 0.5 * rng.standard_normal((4, n)))
    return {
        "zeta_transform": lambda k: k.zeta_transform(levels, n),
        "gibbs_moments": lambda k: k.gibbs_moments(levels, n),
        "free_fit_objective": lambda k: k.free_fit_objective(eps, target, 0.0),
        "nelder_mead_fit (4 starts)": lambda k: k.nelder_mead_fit(target, 0.0, starts, 200 * n, 1e-10, False),
    }


def best_time(fn, repeat):
    # calibrate the loop count to roughly 0.05 s per sample
    number, _ = timeit.Timer(fn).autorange()
    number = max(1, number // 4)
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--modes", type=int, nargs="+", default=[4, 8, 12])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _core is None:
        print("compiled extension not built; only the fallback is timed")

    print(f"{'kernel':30s} {'N':>3s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for n in args.modes:
        rng = np.random.default_rng(args.seed)
        for name, call in cases(n, rng).items():
            slow = best_time(lambda: call(_fallback), args.repeat)
            if _core is None:
                print(f"{name:30s} {n:3d} {slow:12.3e} {'-':>12s} {'-':>8s}")
                continue
            fast = best_time(lambda: call(_core), args.repeat)
            print(f"{name:30s} {n:3d} {slow:12.3e} {fast:12.3e} {slow / fast:8.1f}")


if __name__ == "__main__":
    main()
