#!/usr/bin/env python3
"""Compare the compiled and numpy kernels on index build and search.

Runs the full HNSW build plus a query batch with each available
backend on the same data and reports wall times, speedup, and
recall@10 against the exact-scan oracle.

    python benchmarks/bench_backends.py --n 5000 --dim 256 --queries 100
"""

import argparse
import time

import numpy as np

from ontoforge.vstore import CollectionItem, HnswParams, build_collection, exact_knn
from ontoforge.vstore.kernels import CYTHON_KERNEL, NUMPY_KERNEL


def run(kernel, items, queries, exact_sets, params):
    t0 = time.perf_counter()
    collection = build_collection(items, params, kernel=kernel)
    t_build = time.perf_counter() - t0

    t0 = time.perf_counter()
    recalls = []
    for query, exact in zip(queries, exact_sets):
        hits = {h.key for h in collection.knn_query(query, 10)}
        recalls.append(len(hits & exact) / 10.0)
    t_query = time.perf_counter() - t0
    return t_build, t_query, float(np.mean(recalls))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--queries", type=int, default=100)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    vectors = rng.standard_normal((args.n, args.dim)).astype(np.float32)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    items = [CollectionItem(f"v{i:06d}", "{}", vectors[i]) for i in range(args.n)]
    queries = rng.standard_normal((args.queries, args.dim)).astype(np.float32)
    params = HnswParams(seed=7)

    print(f"n={args.n} dim={args.dim} queries={args.queries} params={params.to_dict()}")
    exact_sets = []
    t0 = time.perf_counter()
    for query in queries:
        exact_sets.append({h.key for h in exact_knn(items, query, 10)})
    print(f"exact-scan oracle: {time.perf_counter() - t0:6.2f} s total")

    kernels = [NUMPY_KERNEL] + ([CYTHON_KERNEL] if CYTHON_KERNEL else [])
    results = {}
    print(f"{'backend':8s} {'build (s)':>10s} {'query (s)':>10s} {'recall@10':>10s}")
    for kernel in kernels:
        t_build, t_query, recall = run(kernel, items, queries, exact_sets, params)
        results[kernel.name] = (t_build, t_query)
        print(f"{kernel.name:8s} {t_build:10.2f} {t_query:10.3f} {recall:10.4f}")

    if "cython" in results:
        nb, nq = results["numpy"]
        cb, cq = results["cython"]
        print(f"\nspeedup: build x{nb / cb:.2f}, query x{nq / cq:.2f}")
    else:
        print("\ncompiled kernel not built; only the numpy fallback was measured")


if __name__ == "__main__":
    main()
