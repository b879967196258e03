"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Each kernel is called once untimed (JIT compile / cache load), then timed
``--repeat`` times; the best wall time is reported. Outputs of the two
paths are compared for exact equality before timing.

With ROADWATCH_NUMBA=0 the "numba" functions are plain Python loops, so the
comparison is then interpreter vs numpy.
"""

import argparse
import time

import numpy as np

from roadwatch import kernels
from roadwatch.models import DEFAULT_SPLIT, tree_fit


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale, rng):
    # 1-NN scoring: a year of vectors against the training references
    n_q = int(200_000 * scale)
    refs = rng.normal(size=(DEFAULT_SPLIT.train_total, 5))
    queries = rng.normal(size=(n_q, 5))
    yield ("nearest_reference", f"{n_q}x{refs.shape[0]}",
           lambda: kernels._nearest_reference_numba(queries, refs),
           lambda: kernels._nearest_reference_numpy(queries, refs))

    # tree traversal over the same queries with a depth-8 tree
    X = rng.normal(size=(400, 5))
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.normal(size=400) > 0).astype(float)
    tree = tree_fit(X, y)
    args = (tree.feature, tree.threshold, tree.left, tree.right, tree.value)
    yield ("tree_apply", f"{n_q} rows, {tree.n_nodes} nodes",
           lambda: kernels._tree_apply_numba(queries, *args),
           lambda: kernels._tree_apply_numpy(queries, *args))

    # split scan on one sorted column
    n_s = int(100_000 * scale)
    xs = np.sort(rng.normal(size=n_s))
    ys = (rng.random(n_s) < 0.4).astype(np.float64)
    yield ("split_scan", f"{n_s} rows",
           lambda: kernels._split_scan_numba(xs, ys, 2),
           lambda: kernels._split_scan_numpy(xs, ys, 2))


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"numba enabled: {kernels.USE_NUMBA}")
    print(f"{'kernel':<18} {'size':<24} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  equal")
    for name, size, fast, slow in cases(args.scale, rng):
        eq = same(fast(), slow())
        t_fast = best_time(fast, args.repeat)
        t_slow = best_time(slow, args.repeat)
        print(f"{name:<18} {size:<24} {t_fast * 1e3:>10.2f} {t_slow * 1e3:>10.2f} "
              f"{t_slow / t_fast:>7.1f}x  {eq}")


if __name__ == "__main__":
    main()
