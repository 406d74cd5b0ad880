"""Similarity kernels used by the index and exact search.

Two interchangeable backends implement the hot operations over a
C-contiguous float32 matrix:

* ``cython`` — the compiled ``_distcore`` extension: batch dot products
  and the full HNSW layer beam search with C heaps;
* ``numpy`` — fancy-indexed matmul plus a heapq-based beam search,
  always available.

The compiled backend is selected at import when the extension built;
set ``ONTOFORGE_PURE_PYTHON=1`` to force the numpy fallback. Both
backends implement the same contract, so either yields valid (and
internally deterministic) indexes; ``benchmarks/bench_backends.py``
compares their speed.
"""

from __future__ import annotations

import heapq
import os

import numpy as np


def _numpy_gather_dot(matrix: np.ndarray, ids: np.ndarray, query: np.ndarray) -> np.ndarray:
    return matrix[ids] @ query


def _numpy_dot_all(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    return matrix @ query


def _numpy_search_layer(
    matrix: np.ndarray,
    nbr: np.ndarray,
    cnt: np.ndarray,
    query: np.ndarray,
    entry_ids: np.ndarray,
    ef: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Beam search on one layer; mirrors the compiled kernel.

    Returns (distances, ids) ascending by distance = -similarity, at
    most ``ef`` results.
    """
    visited: set[int] = set()
    candidates: list[tuple[float, int]] = []  # min-heap on distance
    best: list[tuple[float, int]] = []  # max-heap via negated distance
    entry_list = [int(e) for e in entry_ids]
    entry_sims = matrix[entry_ids] @ query
    for node, sim in zip(entry_list, entry_sims):
        if node in visited:
            continue
        visited.add(node)
        dist = -float(sim)
        if len(best) < ef:
            heapq.heappush(candidates, (dist, node))
            heapq.heappush(best, (-dist, node))
        elif dist < -best[0][0]:
            heapq.heappush(candidates, (dist, node))
            heapq.heapreplace(best, (-dist, node))
    while candidates:
        dist, node = heapq.heappop(candidates)
        if len(best) >= ef and dist > -best[0][0]:
            break
        degree = int(cnt[node])
        if degree == 0:
            continue
        neighbor_ids = [n for n in nbr[node, :degree].tolist() if n not in visited]
        if not neighbor_ids:
            continue
        visited.update(neighbor_ids)
        sims = matrix[neighbor_ids] @ query
        for other, sim in zip(neighbor_ids, sims):
            ndist = -float(sim)
            if len(best) < ef:
                heapq.heappush(candidates, (ndist, other))
                heapq.heappush(best, (-ndist, other))
            elif ndist < -best[0][0]:
                heapq.heappush(candidates, (ndist, other))
                heapq.heapreplace(best, (-ndist, other))
    result = sorted((-neg, node) for neg, node in best)
    dists = np.array([d for d, _ in result], dtype=np.float64)
    ids = np.array([n for _, n in result], dtype=np.int64)
    return dists, ids


class Kernel:
    """One backend: the named hot operations over float32 matrices."""

    def __init__(self, name: str, gather_dot, dot_all, search_layer):
        self.name = name
        self.gather_dot = gather_dot
        self.dot_all = dot_all
        self.search_layer = search_layer

    def __repr__(self) -> str:
        return f"Kernel({self.name})"


NUMPY_KERNEL = Kernel("numpy", _numpy_gather_dot, _numpy_dot_all, _numpy_search_layer)

_compiled: Kernel | None = None
if not os.environ.get("ONTOFORGE_PURE_PYTHON"):
    try:
        from . import _distcore

        _compiled = Kernel(
            "cython", _distcore.gather_dot, _distcore.dot_all, _distcore.search_layer
        )
    except ImportError:
        _compiled = None

CYTHON_KERNEL = _compiled


def active_kernel() -> Kernel:
    return CYTHON_KERNEL if CYTHON_KERNEL is not None else NUMPY_KERNEL


def available_kernels() -> list[Kernel]:
    kernels = [NUMPY_KERNEL]
    if CYTHON_KERNEL is not None:
        kernels.append(CYTHON_KERNEL)
    return kernels


def backend_name() -> str:
    return active_kernel().name
