"""Compare the compiled pairwise-kernel loops against the numpy fallback.

Run from the repository root after installing the package:

    python benchmarks/bench_kernels.py

Times the block-mean RBF reductions on sample-block sizes typical of Gram
assembly, and checks both implementations agree to float tolerance.
"""

from __future__ import annotations

import time

import numpy as np

from daggp import _kernels
from daggp._kernels import fallback


def _time(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    rng = np.random.default_rng(0)
    print(f"active implementation: {_kernels.IMPLEMENTATION}")
    if _kernels.IMPLEMENTATION == "fallback":
        print("compiled extension unavailable; timing the fallback against itself")
    header = f"{'case':>24} {'compiled (ms)':>14} {'fallback (ms)':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n, d, pairs in ((50, 3, 400), (100, 4, 400), (200, 5, 100)):
        a = rng.normal(size=(n, d))
        b = rng.normal(size=(n, d))
        inv_two_l2, var = 0.5, 1.0

        def compiled_case():
            for _ in range(pairs):
                _kernels.pair_mean_rbf(a, b, inv_two_l2, var)
                _kernels.self_mean_rbf(a, inv_two_l2, var)

        def fallback_case():
            for _ in range(pairs):
                fallback.pair_mean_rbf(a, b, inv_two_l2, var)
                fallback.self_mean_rbf(a, inv_two_l2, var)

        got = _kernels.pair_mean_rbf(a, b, inv_two_l2, var)
        want = fallback.pair_mean_rbf(a, b, inv_two_l2, var)
        assert abs(got - want) < 1e-12, (got, want)

        t_ext = _time(compiled_case) * 1e3
        t_fb = _time(fallback_case) * 1e3
        label = f"{pairs}x blocks ({n},{d})"
        print(f"{label:>24} {t_ext:>14.2f} {t_fb:>14.2f} {t_fb / t_ext:>8.2f}")


if __name__ == "__main__":
    main()
