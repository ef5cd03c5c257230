"""Compare the numba and numpy implementations of the pairwise kernels.

Run with ``python3 benchmarks/bench_accel.py [--n 400] [--m 101] [--repeat 5]``.
Prints the best-of-``repeat`` wall time per kernel and the speed-up, after one
warm-up call so numba compilation is excluded.
"""

import argparse
import time

import numpy as np

from funkernel import KernelConfig, kappa_matrix, uniform_grid
from funkernel import _accel
from funkernel.samples import Covariates


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kappa_with(impl, X, cfg):
    saved = _accel._impl
    _accel._impl = impl
    try:
        return kappa_matrix(X, None, cfg)
    finally:
        _accel._impl = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400, help="number of curves")
    ap.add_argument("--m", type=int, default=101, help="grid points per curve")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _accel.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    A = rng.normal(size=(args.n, args.m))
    w = uniform_grid(0.0, 1.0, args.m).weights
    a = rng.normal(size=args.n * 2)
    K = rng.normal(size=(args.n // 10, args.n // 10))
    B = rng.normal(size=(args.m // 4, args.m // 4))
    grid = uniform_grid(0.0, 1.0, args.m)
    X = Covariates([f"s{i}" for i in range(args.n)], rng.normal(size=(args.n, 3)),
                   (A, rng.normal(size=(args.n, args.m))), (grid, grid))
    cfg = KernelConfig(functional="gaussian", sigma_c=2.0)

    cases = {
        "sqdist_weighted": lambda impl: impl.sqdist_weighted(A, A, w),
        "inner_weighted": lambda impl: impl.inner_weighted(A, A, w),
        "gaussian_1d": lambda impl: impl.gaussian_1d(a, a, 0.3),
        "kron": lambda impl: impl.kron(K, B),
        "kappa_matrix": lambda impl: kappa_with(impl, X, cfg),
    }
    print(f"n={args.n} m={args.m} repeat={args.repeat} threads={_accel.numba.get_num_threads()}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}{'max |diff|':>12}")
    for name, call in cases.items():
        t_np = best_time(lambda: call(_accel.numpy_impl), args.repeat)
        t_nb = best_time(lambda: call(_accel.numba_impl), args.repeat)
        diff = float(np.max(np.abs(call(_accel.numpy_impl) - call(_accel.numba_impl))))
        print(f"{name:<18}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
