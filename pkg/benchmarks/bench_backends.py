"""Timing comparison between the compiled backend and the numpy fallback.

Runs the two hot kernels (pairwise scaled squared distances and dynamic time
warping) at a few representative sizes and prints a table of per-call times
for each available backend. Invoke directly:

    python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from dkvc import _pure
from dkvc.backend import have_native

if have_native():
    from dkvc import _native
else:
    _native = None


def time_call(fn, *args, repeats: int = 20) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_sqdist(rng: np.random.Generator, repeats: int) -> list[tuple[str, dict[str, float]]]:
    rows = []
    for n, m, d in [(128, 128, 2), (512, 256, 8), (1024, 512, 24)]:
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((m, d))
        inv_scale = rng.uniform(0.5, 2.0, d)
        timings = {"pure": time_call(_pure.scaled_sqdist, a, b, inv_scale, repeats=repeats)}
        if _native is not None:
            timings["native"] = time_call(_native.scaled_sqdist, a, b, inv_scale, repeats=repeats)
        rows.append((f"scaled_sqdist {n}x{m}x{d}", timings))
    return rows


def bench_dtw(rng: np.random.Generator, repeats: int) -> list[tuple[str, dict[str, float]]]:
    rows = []
    for n, m in [(100, 100), (400, 400), (1000, 800)]:
        dist = rng.uniform(0.0, 1.0, (n, m))
        timings = {"pure": time_call(_pure.dtw, dist, repeats=repeats)}
        if _native is not None:
            timings["native"] = time_call(_native.dtw, dist, repeats=repeats)
        rows.append((f"dtw {n}x{m}", timings))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20,
                        help="timing repetitions per case (best is reported)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = bench_sqdist(rng, args.repeats) + bench_dtw(rng, args.repeats)

    if _native is None:
        print("compiled extension not available; timing the fallback only")
    header = f"{'case':<28}{'pure (ms)':>12}{'native (ms)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, timings in rows:
        pure_ms = timings["pure"] * 1e3
        if "native" in timings:
            native_ms = timings["native"] * 1e3
            ratio = f"{pure_ms / native_ms:9.1f}x"
            print(f"{name:<28}{pure_ms:>12.3f}{native_ms:>14.3f}{ratio:>10}")
        else:
            print(f"{name:<28}{pure_ms:>12.3f}{'-':>14}{'-':>10}")


if __name__ == "__main__":
    main()
