"""Compare the compiled and pure-Python tree kernels.

    python3 benchmarks/bench_kernels.py [--rows 4000] [--cols 30] [--trees 10]

Both backends receive identical inputs; the script also checks that they
grow identical trees before reporting timings.
"""

import argparse
import time

import numpy as np

from tfaml import _kernels
from tfaml._pytree import predict_tree as py_predict


def make_data(rows, cols, seed):
    rng = np.random.default_rng(seed)
    y = (rng.random(rows) < 0.3).astype(np.intp)
    X = rng.normal(size=(rows, cols))
    X[:, 0] += 1.5 * y
    X[:, 1] = np.round(X[:, 1] * 4)  # heavy ties
    return X, y


def time_backend(backend, X, y, trees, max_features):
    rng = np.random.default_rng(0)
    jobs = [(rng.integers(0, len(y), len(y)), int(rng.integers(0, 2**63))) for _ in range(trees)]
    out = []
    t0 = time.perf_counter()
    for sample, seed in jobs:
        out.append(backend.build_tree(X, y, sample, 10, 5, 32, max_features, seed))
    build = (time.perf_counter() - t0) / trees
    t0 = time.perf_counter()
    for tree in out:
        backend.predict_tree(*tree[:5], X)
    predict = (time.perf_counter() - t0) / trees
    return out, build, predict


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--cols", type=int, default=30)
    ap.add_argument("--trees", type=int, default=10)
    args = ap.parse_args()

    X, y = make_data(args.rows, args.cols, 1)
    k = int(np.ceil(np.sqrt(args.cols)))
    py_trees, py_build, py_pred = time_backend(_kernels.python_backend, X, y, args.trees, k)
    print(f"rows={args.rows} cols={args.cols} trees={args.trees}")
    print(f"python   build {py_build * 1e3:9.2f} ms/tree   predict {py_pred * 1e3:8.3f} ms/tree")
    if _kernels.compiled_backend is None:
        print("compiled backend not available (extension not built)")
        return
    c_trees, c_build, c_pred = time_backend(_kernels.compiled_backend, X, y, args.trees, k)
    same = all(
        all(np.array_equal(a, b) for a, b in zip(t1, t2)) for t1, t2 in zip(py_trees, c_trees)
    )
    print(f"compiled build {c_build * 1e3:9.2f} ms/tree   predict {c_pred * 1e3:8.3f} ms/tree")
    print(f"speed-up build x{py_build / c_build:.1f}   predict x{py_pred / c_pred:.1f}   identical trees: {same}")
    assert same and np.array_equal(py_predict(*py_trees[0][:5], X), py_predict(*c_trees[0][:5], X))


if __name__ == "__main__":
    main()
