"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Kernel timings call both modules directly. The end-to-end fit runs in two
subprocesses, one per backend (selected via UNKSIZE_PURE_PYTHON), on the
bundled M. bovis data with K=3.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np
from scipy.special import expit

from unksize import _fallback

try:
    from unksize import _kernels
except ImportError:
    _kernels = None

FIT_SNIPPET = (
    "import time; from unksize import ecm_fit, load_mbovis, kernels;"
    "d = load_mbovis(); t = time.perf_counter(); ecm_fit(d, 3);"
    "print(kernels.BACKEND, time.perf_counter() - t)"
)


def make_inputs(r, p, K, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(r), rng.normal(size=(r, p - 1))])
    y = rng.poisson(60, r)
    h = expit(X @ rng.normal(0, 0.4, p))
    d1 = h * (1 - h)
    d2 = d1 * (1 - 2 * h)
    alphas = rng.dirichlet(np.ones(K))
    lambdas = rng.uniform(10, 150, K)
    lam_bar = rng.uniform(50, 120, r)
    return X, y, h, d1, d2, alphas, lambdas, lam_bar


def time_call(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat, n)) / n


def bench_kernels(repeat):
    print(f"{'kernel':<22} {'r':>7} {'numpy (us)':>12} {'cython (us)':>12} {'speedup':>8}")
    for r in (129, 2_000, 50_000):
        X, y, h, d1, d2, a, lam, lam_bar = make_inputs(r, 12, 4)
        lgy = _fallback.log_factorials(y)
        cases = {
            "estep": lambda m: m.estep(y, h, a, lam, lgy),
            "index_newton_terms": lambda m: m.index_newton_terms(X, y, h, d1, d2, lam_bar),
            "t2_beta_part": lambda m: m.t2_beta_part(y, h, lam_bar),
        }
        for name, call in cases.items():
            tp = time_call(lambda: call(_fallback), repeat)
            if _kernels is None:
                print(f"{name:<22} {r:>7} {tp * 1e6:12.1f} {'n/a':>12}")
                continue
            tc = time_call(lambda: call(_kernels), repeat)
            print(f"{name:<22} {r:>7} {tp * 1e6:12.1f} {tc * 1e6:12.1f} {tp / tc:7.1f}x")


def bench_fit():
    print("\nend-to-end ecm_fit(M. bovis, K=3):")
    for flag in ("1", "0"):
        env = dict(os.environ, UNKSIZE_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET], env=env,
                             capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<8} {float(secs):.3f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed\n")
    bench_kernels(args.repeat)
    bench_fit()


if __name__ == "__main__":
    main()
