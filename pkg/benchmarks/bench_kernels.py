"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--nodes 1500] [--side 200]
"""
import argparse
import timeit

import numpy as np

from hsigraph import kernels
from hsigraph.superpixels import _grid_centers


def cases(nodes, side, rng):
    X = rng.standard_normal((nodes, 5))
    Z = ((X[:, None] - X[None]) ** 2).sum(-1)
    np.fill_diagonal(Z, 0)
    img = np.cumsum(rng.standard_normal((side, side)), axis=1)
    img = (img - img.min()) * (100 / np.ptp(img))
    cy, cx, step = _grid_centers(side, side, side * side // 30)
    centers = np.column_stack([cy, cx, img[cy.astype(int), cx.astype(int)]])
    labels = rng.integers(0, 4, (side, side)).astype(np.int64)
    indptr = np.arange(0, nodes * 20 + 1, 20, dtype=np.int64)
    values = rng.standard_normal(nodes * 20)
    return {
        "knn_rows": lambda m: m.knn_rows(Z, 10),
        "slic_iterate": lambda m: m.slic_iterate(img, centers.copy(), step, 10.0, 10),
        "label_components": lambda m: m.label_components(labels),
        "project_rows": lambda m: m.project_rows(indptr, values),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--nodes", type=int, default=1500)
    ap.add_argument("--side", type=int, default=200)
    args = ap.parse_args()
    backends = [("python", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        backends.append(("cython", kernels.compiled_backend))
    else:
        print("compiled kernels not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for kernel, fn in cases(args.nodes, args.side, rng).items():
        times = [min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for _, mod in backends]
        ratio = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{kernel:<18}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + ratio)


if __name__ == "__main__":
    main()
