"""Numba vs numpy kernel timings, plus end-to-end runs under each backend.

Usage::

    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Kernel timings call both variants directly.  The end-to-end part runs a
likelihood-weighting query and a mixture learning pass in a subprocess per
backend, with ``STREAMBAYES_DISABLE_NUMBA`` selecting the numpy path.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from streambayes import _kernels

END_TO_END = r"""
import time, numpy as np
import streambayes as sb
from streambayes.inference import importance_sampling_infer, InferenceConfig
A = sb.Variable.finite("A", 3); B = sb.Variable.finite("B", 2); C = sb.Variable.finite("C", 2)
bn = sb.BayesianNetwork.build([A, B, C], {"B": ["A"], "C": ["A", "B"]}, {
    "A": sb.Multinomial([[0.2, 0.3, 0.5]]),
    "B": sb.Multinomial([[0.9, 0.1], [0.4, 0.6], [0.5, 0.5]]),
    "C": sb.Multinomial([[0.7, 0.3], [0.2, 0.8], [0.5, 0.5], [0.1, 0.9], [0.6, 0.4], [0.3, 0.7]]),
}).check()
importance_sampling_infer(bn, {"C": 1}, ["A"], InferenceConfig(sample_count=1000))
t = time.perf_counter()
importance_sampling_infer(bn, {"C": 1}, ["A"], InferenceConfig(sample_count=1_000_000))
t_is = time.perf_counter() - t
rng = np.random.default_rng(0)
y = np.where(rng.random(20000) < 0.5, -5, 5) + rng.standard_normal(20000)
attrs = sb.Attributes.from_spaces([("Y", sb.StateSpace.real())])
m = sb.gaussian_mixture(attrs, 2)
t = time.perf_counter()
for i in range(0, 20000, 2000):
    m.update(y[i:i + 2000, None])
t_learn = time.perf_counter() - t
print(f"{sb.BACKEND} is_1e6={t_is:.3f}s gmm_learn_2e4={t_learn:.3f}s")
"""


def best_of(fn, repeat):
    fn()  # warm-up / JIT
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    n = args.n
    rng = np.random.default_rng(0)

    probs = rng.dirichlet(np.ones(4), size=64)
    cdf = np.cumsum(probs, axis=1)
    rows = rng.integers(0, 64, n)
    u = rng.random(n)
    logits = rng.standard_normal((n, 4))
    cols = rng.integers(0, 4, n)
    w = rng.random(n)
    values = rng.integers(0, 3, (n, 3))
    cards = np.array([3, 3, 3])

    cases = {
        "categorical_sample": lambda k: k.categorical_sample(cdf, rows, u),
        "normalize_log_rows": lambda k: k.normalize_log_rows(logits),
        "scatter_counts": lambda k: k.scatter_counts(rows, cols, w, 64, 4),
        "config_index": lambda k: k.config_index(values, cards),
    }
    if _kernels.numba_kernels is None:
        print("numba not importable; only the numpy kernels can run")
        return
    print(f"kernel timings, n={n:,} (best of {args.repeat})")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, case in cases.items():
        tn = best_of(lambda: case(_kernels.numpy_kernels), args.repeat)
        tb = best_of(lambda: case(_kernels.numba_kernels), args.repeat)
        print(f"{name:<22}{tn * 1e3:>12.2f}{tb * 1e3:>12.2f}{tn / tb:>9.1f}x")

    print("\nend to end")
    for flag in ("1", "0"):
        env = dict(os.environ, STREAMBAYES_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        print(" ", out.stdout.strip())


if __name__ == "__main__":
    main()
