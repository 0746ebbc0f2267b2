"""Compare the compiled and pure-Python kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from spdmetric import _backend
from spdmetric.itml import ItmlConfig, itml_fit


def itml_case(d=6, n_points=200, n_cons=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_points, d))
    i = rng.integers(0, n_points, n_cons)
    j = (i + 1 + rng.integers(0, n_points - 1, n_cons)) % n_points
    cons = [(int(a), int(b), bool(k % 2)) for k, (a, b) in enumerate(zip(i, j))]
    return X, cons


def bench_sweep(name, X, cons, repeat):
    cfg = ItmlConfig(gamma=10.0, max_sweeps=20, conv_tol=1e-300)
    t = min(timeit.repeat(lambda: itml_fit(X, cons, cfg, backend=name), number=1, repeat=repeat))
    return t / 20


def bench_perm(name, k, repeat):
    C = np.random.default_rng(1).integers(0, 20, size=(k, k))
    kern = _backend.get(name)
    return min(timeit.repeat(lambda: kern.best_permutation_score(C), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = _backend.available()
    print(f"backends: {', '.join(backends)} (active: {_backend.BACKEND})")
    rows = []
    for d, n_cons in ((6, 400), (45, 400), (45, 2000)):
        X, cons = itml_case(d=d, n_cons=n_cons)
        t = {b: bench_sweep(b, X, cons, args.repeat) for b in backends}
        rows.append((f"itml sweep d={d} constraints={n_cons}", t))
    for k in (6, 8, 9):
        t = {b: bench_perm(b, k, args.repeat) for b in backends}
        rows.append((f"cluster accuracy k={k}", t))
    width = max(len(r[0]) for r in rows)
    print(f"{'case'.ljust(width)}  " + "  ".join(f"{b:>12}" for b in backends) + "     speedup")
    for name, t in rows:
        cells = "  ".join(f"{t[b] * 1e3:10.3f}ms" for b in backends)
        speed = f"{t['python'] / t['cython']:9.1f}x" if "cython" in t else ""
        print(f"{name.ljust(width)}  {cells}  {speed}")


if __name__ == "__main__":
    main()
