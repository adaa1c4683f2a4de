"""Time the compiled and pure-Python kernels on the shapes a sweep trial uses.

    python benchmarks/bench_kernels.py --N 10000 --repeats 5
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from shadowlab import kernels
from shadowlab.cocycle import BirkhoffSums, LambdaTable


def cases(N: int, seed: int):
    rng = np.random.default_rng(seed)
    table = LambdaTable(0, [2.0, 1.0 / 3.0])
    logs = table.logs[rng.integers(0, 2, N - 1)]
    A = BirkhoffSums.from_logs(logs).sums
    coef, forcing = np.exp(logs), rng.uniform(-1.0, 1.0, N - 1)
    x = kernels.get("pure").linear_recurrence(coef, forcing, 0.0)
    s = np.exp(A - A.max())
    order = np.argsort(A, kind="stable")
    fresh = rng.integers(0, 2, (N, 2 * 16 + 1), dtype=np.uint8)
    return {
        "linear_recurrence": lambda m: m.linear_recurrence(coef, forcing, 0.0),
        "chebyshev_pair": lambda m: m.chebyshev_pair(order, s, x),
        "carry_windows": lambda m: m.carry_windows(fresh, 1, 31),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--N", type=int, default=10_000, help="trajectory length")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    names = kernels.available()
    mods = {n: kernels.get(n) for n in names}
    print(f"N = {args.N}, best of {args.repeats}; backends: {', '.join(names)}")
    print(f"{'kernel':<20}" + "".join(f"{n + ' (ms)':>14}" for n in names) + (f"{'speedup':>10}" if len(names) > 1 else ""))
    for kernel, fn in cases(args.N, args.seed).items():
        times = [min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeats)) * 1e3 for m in mods.values()]
        line = f"{kernel:<20}" + "".join(f"{t:>14.3f}" for t in times)
        if len(times) > 1:
            line += f"{times[-1] / times[0]:>9.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
