"""Time the compiled and numpy value kernels on the same batches.

    python3 benchmarks/bench_kernels.py [--batch 20000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from narrative_media import kernels
from narrative_media.random_envs import random_environment


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    py = kernels.backend_module("python")
    try:
        cy = kernels.backend_module("cython")
    except ImportError:
        cy = None
        print("compiled extension not built; timing numpy only")

    rng = np.random.default_rng(args.seed)
    print(f"{'dims':>8} {'narrative':>10} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} {'max diff':>10}")
    for dims in ((2, 2, 2, 2), (3, 3, 3, 2), (4, 3, 3, 3)):
        T, S, A, Y = dims
        env = random_environment(rng, "none", T=T, S=A, A=A, Y=Y)
        X = rng.dirichlet(np.ones(A), size=(args.batch, T))
        for code in range(4):
            t_py = _time(lambda: kernels.values_direct_batch(env, X, code, 1e-9, py), args.repeat)
            line = f"{'x'.join(map(str, dims)):>8} {code:>10d} {t_py * 1e3:>10.2f}"
            if cy is not None:
                t_cy = _time(lambda: kernels.values_direct_batch(env, X, code, 1e-9, cy), args.repeat)
                diff = np.abs(kernels.values_direct_batch(env, X, code, 1e-9, py)
                              - kernels.values_direct_batch(env, X, code, 1e-9, cy)).max()
                line += f" {t_cy * 1e3:>10.2f} {t_py / t_cy:>8.1f} {diff:>10.2e}"
            print(line)


if __name__ == "__main__":
    main()
