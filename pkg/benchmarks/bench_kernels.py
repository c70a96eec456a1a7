"""Time the coalition-table kernels on each available backend.

    python3 benchmarks/bench_kernels.py [--players 12 14 16] [--repeat 3]

Tables come from random monotone games (upward closures of a few random
minimal coalitions), so every backend sees the same input.  Results of the
backends are compared before timing.
"""

import argparse
import random
import time

from shapval import kernels

KERNELS = ("upward_closure", "minimal_masks", "count_by_size", "pivotal_counts", "pivotal_counts_all")


def random_game(n, rng, generators=6):
    gens = [rng.getrandbits(n) | (1 << rng.randrange(n)) for _ in range(generators)]
    return gens, kernels.backends()["python"].upward_closure(gens, n)


def run_kernel(mod, name, gens, table, n):
    if name == "upward_closure":
        return mod.upward_closure(gens, n)
    if name == "minimal_masks":
        return mod.minimal_masks(table, n)
    if name == "count_by_size":
        return mod.count_by_size(table, n)
    if name == "pivotal_counts":
        return mod.pivotal_counts(table, n, 0)
    return mod.pivotal_counts_all(table, n)


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, nargs="+", default=[10, 12, 14])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.backends()
    names = sorted(backends)
    print(f"backends: {', '.join(names)} (active: {kernels.BACKEND})")
    header = f"{'kernel':<20}{'n':>4}" + "".join(f"{b + ' s':>14}" for b in names)
    if "cython" in backends:
        header += f"{'speedup':>10}"
    print(header)
    rng = random.Random(args.seed)
    for n in args.players:
        gens, table = random_game(n, rng)
        for name in KERNELS:
            results = {b: run_kernel(backends[b], name, gens, table, n) for b in names}
            ref = results["python"]
            for b in names:
                if list(results[b]) != list(ref):
                    raise SystemExit(f"{name}: backend {b} disagrees with python at n={n}")
            times = {b: best_time(lambda m=backends[b]: run_kernel(m, name, gens, table, n), args.repeat) for b in names}
            row = f"{name:<20}{n:>4}" + "".join(f"{times[b]:>14.5f}" for b in names)
            if "cython" in times:
                row += f"{times['python'] / max(times['cython'], 1e-9):>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
