"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Both code paths live side by side in ``vecbal._kernels``; the module-level
dispatch is controlled by VECBAL_NUMBA but here we call each path directly.
The first numba call of every kernel is a warm-up and is not timed.
"""
import argparse
import time

import numpy as np

from vecbal import _kernels
from vecbal.core import CombinationForest
from vecbal.reduce import FREEZE_TOL, PIVOT_REL, RESIDUAL_REL


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def random_forest(n, rng):
    forest = CombinationForest(n)
    nodes = rng.permutation(n)
    while nodes.size > 1:
        half = nodes.size // 2
        new = forest.combine(nodes[:half], 1, nodes[half : 2 * half], -1)
        nodes = np.r_[new, nodes[2 * half :]]
    return forest, int(nodes[0])


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels.gray_min_numba is None:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(0)
    rows = []

    X = rng.uniform(-1, 1, (3, 22))
    stop = 1 << 21
    _kernels.gray_min_numba(X, 0, 1 << 10)
    t_nb, r_nb = best_of(lambda: _kernels.gray_min_numba(X, 0, stop), args.repeat)
    t_np, r_np = best_of(lambda: _kernels.gray_min_numpy(X, 0, stop), args.repeat)
    rows.append(("gray_min m=3 n=22", t_nb, t_np, r_nb[1] == r_np[1]))

    A = rng.uniform(-1, 1, (4, 3000))
    order = np.arange(A.shape[1], dtype=np.int64)
    call = lambda f: f(A, order, FREEZE_TOL, PIVOT_REL, RESIDUAL_REL)  # noqa: E731
    call(_kernels.reduce_walk_numba)
    t_nb, r_nb = best_of(lambda: call(_kernels.reduce_walk_numba), args.repeat)
    t_np, r_np = best_of(lambda: call(_kernels.reduce_walk_numpy), args.repeat)
    rows.append(("reduce_walk m=4 N=3000", t_nb, t_np, bool(np.array_equal(np.sign(r_nb[0]), np.sign(r_np[0])))))

    n = 200_000
    forest, root = random_forest(n, rng)
    k = forest.size
    parts = (forest._left[:k], forest._right[:k], forest._lsign[:k], forest._rsign[:k], n, root)

    def signs(f):
        out = np.zeros(n, dtype=np.int8)
        f(*parts, out)
        return out

    signs(_kernels.forest_signs_numba)
    t_nb, o_nb = best_of(lambda: signs(_kernels.forest_signs_numba), args.repeat)
    t_np, o_np = best_of(lambda: signs(_kernels.forest_signs_numpy), args.repeat)
    rows.append((f"forest_signs n={n}", t_nb, t_np, bool(np.array_equal(o_nb, o_np))))

    print(f"{'kernel':28s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} agree")
    for name, a, b, ok in rows:
        print(f"{name:28s} {a:10.4f} {b:10.4f} {b / a:8.1f} {ok}")


if __name__ == "__main__":
    main()
