"""Compare the numba and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--generations N] [--repeats R]

Times tree growth, the parent sums behind theta_hat, the second-order sums
and the per-generation sums used by the quadratic statistic, then one full
simulate + estimate round trip. Compilation is excluded by a warm-up call.
"""
import argparse
import time

import numpy as np

from rcbar._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from rcbar.estimate import estimate_all
from rcbar.model import BivariateGaussian, ModelSpec
from rcbar.simulate import _draw_innovations, simulate_tree

SPEC = ModelSpec(BivariateGaussian(0.4, 0.4, 0.2, 0.2, 0.5), BivariateGaussian(1, 1, 1, 1, 0.5))


def best_of(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(kern, n):
    x1, coef, noise = _draw_innovations(SPEC, n, 1)
    values = np.empty(2 ** (n + 1) - 1)
    values[0] = x1
    tree = simulate_tree(SPEC, n, 1, kernels=kern)
    v, n_par = tree.values, tree.n_parents
    return {
        "grow_tree": lambda: kern.grow_tree(values, coef, noise),
        "parent_sums": lambda: kern.parent_sums(v, n_par),
        "second_order_sums": lambda: kern.second_order_sums(v, n_par, 0.4, 1.0, 0.4, 1.0),
        "generation_sums": lambda: kern.generation_sums(v, n),
        "simulate+estimate": lambda: estimate_all(simulate_tree(SPEC, n, 1, kernels=kern), kernels=kern),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--generations", type=int, default=16)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    if NUMBA_KERNELS is None:
        raise SystemExit("numba is not installed; nothing to compare")
    np_cases = cases(NUMPY_KERNELS, args.generations)
    nb_cases = cases(NUMBA_KERNELS, args.generations)
    print(f"n = {args.generations} generations ({2 ** (args.generations + 1) - 1} nodes), best of {args.repeats}")
    print(f"{'kernel':<20}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name in np_cases:
        t_np = best_of(np_cases[name], args.repeats)
        t_nb = best_of(nb_cases[name], args.repeats)
        print(f"{name:<20}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
